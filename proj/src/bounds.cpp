#include "hetmra/bounds.hpp"

#include <algorithm>
#include <array>
#include <map>
#include <stdexcept>

namespace hmra {

namespace {

using Triple = std::array<std::size_t, 3>;

Triple canonical(std::size_t a, std::size_t b, std::size_t c) {
    Triple t{a, b, c};
    std::sort(t.begin(), t.end());
    return t;
}

}  // namespace

BispectrumOrbits bispectrum_orbits(std::size_t L) {
    if (L < 2) throw std::invalid_argument("bispectrum_orbits requires L >= 2");
    BispectrumOrbits out;
    out.L = L;
    out.orbit.resize(L * L);
    out.conjugated.resize(L * L);
    std::map<Triple, std::size_t> ids;
    auto neg = [L](std::size_t i) { return (L - i) % L; };
    for (std::size_t k = 0; k < L; ++k) {
        for (std::size_t l = 0; l < L; ++l) {
            const std::size_t d = (l + L - k) % L;
            const Triple t = canonical(k, neg(l), d);
            const Triple tc = canonical(neg(k), l, neg(d));
            const Triple& key = tc < t ? tc : t;
            auto [it, inserted] = ids.try_emplace(key, out.self_conjugate.size());
            if (inserted) {
                out.self_conjugate.push_back(t == tc);
                out.representative.push_back(k * L + l);
            }
            out.orbit[k * L + l] = it->second;
        }
    }
    // Second pass: mark entries whose triple is the negation of their representative's triple.
    for (std::size_t e = 0; e < L * L; ++e) {
        const std::size_t id = out.orbit[e];
        const std::size_t r = out.representative[id];
        const std::size_t k = e / L, l = e % L, rk = r / L, rl = r % L;
        const Triple t = canonical(k, neg(l), (l + L - k) % L);
        const Triple rt = canonical(rk, neg(rl), (rl + L - rk) % L);
        out.conjugated[e] = !out.self_conjugate[id] && t != rt;
    }
    return out;
}

FeatureCount feature_count(std::size_t L) {
    if (L < 2) throw std::invalid_argument("feature_count requires L >= 2");
    const auto orbits = bispectrum_orbits(L);
    FeatureCount c;
    c.n1 = 1;
    c.n2 = L / 2 + 1;
    for (bool self : orbits.self_conjugate) c.n3 += self ? 1 : 2;
    return c;
}

std::size_t max_K(std::size_t L, bool weights_unknown) {
    const std::size_t total = feature_count(L).total();
    std::size_t K = 0;
    while (true) {
        const std::size_t next = K + 1;
        const std::size_t needed = next * L + (weights_unknown ? next - 1 : 0);
        if (needed > total) break;
        K = next;
    }
    return K;
}

}  // namespace hmra
