#include "hetmra/core.hpp"

#include <fftw3.h>

#include <cmath>
#include <memory>
#include <mutex>
#include <unordered_map>

namespace hmra {

namespace {

// FFTW planning is not thread-safe; execution of an existing plan on new arrays is.
std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
}

class FftPlan {
public:
    FftPlan(std::size_t L, int sign) : L_(L) {
        std::lock_guard lock(planner_mutex());
        auto* in = fftw_alloc_complex(L);
        auto* out = fftw_alloc_complex(L);
        plan_ = fftw_plan_dft_1d(static_cast<int>(L), in, out, sign, FFTW_ESTIMATE | FFTW_UNALIGNED);
        fftw_free(in);
        fftw_free(out);
        if (plan_ == nullptr) throw std::runtime_error("fftw: failed to create plan");
    }
    FftPlan(const FftPlan&) = delete;
    FftPlan& operator=(const FftPlan&) = delete;
    ~FftPlan() {
        std::lock_guard lock(planner_mutex());
        fftw_destroy_plan(plan_);
    }

    void execute(const Complex* in, Complex* out) const {
        // fftw_complex is layout compatible with std::complex<double>.
        fftw_execute_dft(plan_, reinterpret_cast<fftw_complex*>(const_cast<Complex*>(in)),
                         reinterpret_cast<fftw_complex*>(out));
    }

private:
    std::size_t L_;
    fftw_plan plan_ = nullptr;
};

const FftPlan& plan_for(std::size_t L, int sign) {
    thread_local std::unordered_map<std::size_t, std::unique_ptr<FftPlan>> forward;
    thread_local std::unordered_map<std::size_t, std::unique_ptr<FftPlan>> backward;
    auto& cache = sign == FFTW_FORWARD ? forward : backward;
    auto& slot = cache[L];
    if (!slot) slot = std::make_unique<FftPlan>(L, sign);
    return *slot;
}

}  // namespace

Signal::Signal(RealVector values) : values_(std::move(values)) {
    if (values_.size() < 2) throw std::invalid_argument("signal length must be at least 2");
    for (double v : values_) {
        if (!std::isfinite(v)) throw std::invalid_argument("signal has non-finite entries");
    }
}

SignalSet::SignalSet(std::size_t K, std::size_t L) : K_(K), L_(L), data_(K * L, 0.0) {}

SignalSet::SignalSet(const std::vector<RealVector>& rows) {
    if (rows.empty()) throw std::invalid_argument("signal set must contain at least one signal");
    K_ = rows.size();
    L_ = rows.front().size();
    data_.reserve(K_ * L_);
    for (const auto& r : rows) {
        if (r.size() != L_) throw std::invalid_argument("signals in a set must share one length");
        data_.insert(data_.end(), r.begin(), r.end());
    }
}

std::vector<RealVector> SignalSet::rows() const {
    std::vector<RealVector> out;
    out.reserve(K_);
    for (std::size_t k = 0; k < K_; ++k) out.emplace_back((*this)[k].begin(), (*this)[k].end());
    return out;
}

ComplexVector dft(std::span<const Complex> x) {
    ComplexVector out(x.size());
    if (x.empty()) return out;
    plan_for(x.size(), FFTW_FORWARD).execute(x.data(), out.data());
    return out;
}

ComplexVector dft(std::span<const double> x) {
    ComplexVector in(x.begin(), x.end());
    return dft(std::span<const Complex>(in));
}

ComplexVector idft(std::span<const Complex> xhat) {
    ComplexVector out(xhat.size());
    if (xhat.empty()) return out;
    plan_for(xhat.size(), FFTW_BACKWARD).execute(xhat.data(), out.data());
    const double scale = 1.0 / static_cast<double>(xhat.size());
    for (auto& v : out) v *= scale;
    return out;
}

RealVector idft_real(std::span<const Complex> xhat) {
    const auto z = idft(xhat);
    RealVector out(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) out[i] = z[i].real();
    return out;
}

RealVector cyclic_shift(std::span<const double> x, std::int64_t r) {
    const std::size_t L = x.size();
    RealVector out(L);
    if (L == 0) return out;
    const std::size_t s = wrap_index(r, L);
    for (std::size_t n = 0; n < L; ++n) out[(n + s) % L] = x[n];
    return out;
}

ComplexMatrix bispectrum_from_spectrum(std::span<const Complex> xhat) {
    const std::size_t L = xhat.size();
    ComplexMatrix B(L, L);
    for (std::size_t k = 0; k < L; ++k) {
        const Complex a = xhat[k];
        auto row = B.row(k);
        for (std::size_t l = 0; l < L; ++l) {
            const std::size_t d = l >= k ? l - k : l + L - k;
            row[l] = a * std::conj(xhat[l]) * xhat[d];
        }
    }
    return B;
}

Features features_from_spectrum(std::span<const Complex> xhat) {
    const std::size_t L = xhat.size();
    Features f;
    f.mean = xhat[0].real() / static_cast<double>(L);
    f.power.resize(L);
    for (std::size_t k = 0; k < L; ++k) f.power[k] = std::norm(xhat[k]);
    f.bispectrum = bispectrum_from_spectrum(xhat);
    return f;
}

Features invariant_features(std::span<const double> x) {
    const auto xhat = dft(x);
    return features_from_spectrum(xhat);
}

RealMatrix bias_matrix(std::size_t L) {
    if (L < 2) throw std::invalid_argument("bias matrix requires L >= 2");
    RealMatrix A(L, L, 0.0);
    for (std::size_t k = 0; k < L; ++k) {
        A(k, k) = 1.0;
        A(0, k) = 1.0;
        A(k, 0) = 1.0;
    }
    A(0, 0) = 3.0;
    return A;
}

}  // namespace hmra
