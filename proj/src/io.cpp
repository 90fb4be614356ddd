#include "hetmra/io.hpp"

#include <bit>
#include <cstring>
#include <limits>

namespace hmra::io {

static_assert(std::endian::native == std::endian::little, "observation files are read natively as little-endian");

namespace {

constexpr char kMagic[4] = {'M', 'R', 'A', '1'};

template <typename T>
void put(std::ostream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw FormatError("observation file: truncated header");
    return v;
}

ObservationHeader read_header(std::istream& in) {
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0) throw FormatError("observation file: bad magic (expected MRA1)");
    ObservationHeader h;
    h.L = get<std::uint32_t>(in);
    h.N = get<std::uint64_t>(in);
    h.sigma = get<double>(in);
    if (h.L < 2) throw FormatError("observation file: L must be at least 2");
    if (!(h.sigma >= 0.0)) throw FormatError("observation file: sigma must be >= 0");
    return h;
}

const nlohmann::json& field(const nlohmann::json& j, const char* key) {
    if (!j.is_object() || !j.contains(key)) throw FormatError(std::string("missing JSON field '") + key + "'");
    return j.at(key);
}

}  // namespace

ObservationWriter::ObservationWriter(const std::filesystem::path& path, const ObservationHeader& header)
    : out_(path, std::ios::binary | std::ios::trunc), header_(header) {
    if (!out_) throw IoError("cannot open " + path.string() + " for writing");
    out_.write(kMagic, 4);
    put(out_, header.L);
    put(out_, header.N);
    put(out_, header.sigma);
}

void ObservationWriter::write(const ObservationBatch& batch) {
    if (batch.L != header_.L) throw FormatError("observation batch length does not match file header");
    out_.write(reinterpret_cast<const char*>(batch.values.data()),
               static_cast<std::streamsize>(batch.values.size() * sizeof(double)));
    written_ += batch.size();
}

void ObservationWriter::close() {
    out_.close();
    if (!out_) throw IoError("failed writing observation file");
    if (written_ != header_.N) throw FormatError("observation file: record count does not match header");
}

ObservationReader::ObservationReader(const std::filesystem::path& path) : path_(path), in_(path, std::ios::binary) {
    if (!in_) throw IoError("cannot open " + path.string());
    header_ = read_header(in_);
    const auto expected = kObservationHeaderBytes + header_.N * header_.L * sizeof(double);
    if (std::filesystem::file_size(path) != expected) {
        throw FormatError("observation file: size does not match header (L=" + std::to_string(header_.L) +
                          ", N=" + std::to_string(header_.N) + ")");
    }
}

std::size_t ObservationReader::read(std::size_t max_count, ObservationBatch& out) {
    const auto count = static_cast<std::size_t>(std::min<std::uint64_t>(max_count, header_.N - read_));
    out.L = header_.L;
    out.values.resize(count * header_.L);
    out.shifts.clear();
    out.classes.clear();
    in_.read(reinterpret_cast<char*>(out.values.data()),
             static_cast<std::streamsize>(out.values.size() * sizeof(double)));
    if (!in_) throw FormatError("observation file: truncated data");
    read_ += count;
    return count;
}

void ObservationReader::rewind() {
    in_.clear();
    in_.seekg(static_cast<std::streamoff>(kObservationHeaderBytes));
    read_ = 0;
}

ObservationFileSource::ObservationFileSource(std::filesystem::path path) : path_(std::move(path)) {
    header_ = ObservationReader(path_).header();
}

void ObservationFileSource::for_each_batch(std::size_t batch_size,
                                           const std::function<void(const ObservationBatch&)>& fn) const {
    ObservationReader reader(path_);
    ObservationBatch batch;
    while (reader.read(batch_size, batch) > 0) fn(batch);
}

void write_labels(std::ostream& out, const ObservationBatch& batch) {
    for (std::size_t j = 0; j < batch.size(); ++j) out << batch.shifts[j] << ',' << batch.classes[j] + 1 << '\n';
}

nlohmann::json to_json(const InvariantFeatures& f) {
    nlohmann::json j;
    j["L"] = f.L;
    j["sigma"] = f.sigma;
    if (f.sample_count) {
        j["n"] = *f.sample_count;
    } else {
        j["n"] = "inf";
    }
    j["m1"] = f.m1;
    j["m2"] = f.m2;
    auto re = nlohmann::json::array();
    auto im = nlohmann::json::array();
    for (std::size_t k = 0; k < f.L; ++k) {
        auto rr = nlohmann::json::array();
        auto ri = nlohmann::json::array();
        for (std::size_t l = 0; l < f.L; ++l) {
            rr.push_back(f.m3(k, l).real());
            ri.push_back(f.m3(k, l).imag());
        }
        re.push_back(std::move(rr));
        im.push_back(std::move(ri));
    }
    j["m3_re"] = std::move(re);
    j["m3_im"] = std::move(im);
    return j;
}

InvariantFeatures features_from_json(const nlohmann::json& j) {
    try {
        InvariantFeatures f;
        f.L = field(j, "L").get<std::size_t>();
        f.sigma = field(j, "sigma").get<double>();
        const auto& n = field(j, "n");
        if (n.is_string()) {
            if (n.get<std::string>() != "inf") throw FormatError("features: 'n' must be an integer or \"inf\"");
        } else {
            f.sample_count = n.get<std::uint64_t>();
        }
        f.m1 = field(j, "m1").get<double>();
        f.m2 = field(j, "m2").get<RealVector>();
        const auto re = field(j, "m3_re").get<std::vector<RealVector>>();
        const auto im = field(j, "m3_im").get<std::vector<RealVector>>();
        if (f.L < 2 || f.m2.size() != f.L || re.size() != f.L || im.size() != f.L) {
            throw FormatError("features: dimensions inconsistent with L");
        }
        f.m3 = ComplexMatrix(f.L, f.L);
        for (std::size_t k = 0; k < f.L; ++k) {
            if (re[k].size() != f.L || im[k].size() != f.L) throw FormatError("features: m3 rows must have L entries");
            for (std::size_t l = 0; l < f.L; ++l) f.m3(k, l) = {re[k][l], im[k][l]};
        }
        return f;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("features: ") + e.what());
    }
}

nlohmann::json to_json(const GroundTruth& truth) {
    nlohmann::json j;
    j["K"] = truth.signals.count();
    j["L"] = truth.signals.length();
    j["sigma"] = truth.sigma;
    j["signals"] = truth.signals.rows();
    j["weights"] = RealVector(truth.weights.values().begin(), truth.weights.values().end());
    return j;
}

GroundTruth truth_from_json(const nlohmann::json& j) {
    try {
        GroundTruth t;
        t.signals = SignalSet(field(j, "signals").get<std::vector<RealVector>>());
        t.weights = MixingWeights(field(j, "weights").get<RealVector>());
        t.sigma = field(j, "sigma").get<double>();
        if (t.weights.size() != t.signals.count()) throw FormatError("truth: weights must have K entries");
        return t;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("truth: ") + e.what());
    } catch (const std::invalid_argument& e) {
        throw FormatError(std::string("truth: ") + e.what());
    }
}

nlohmann::json to_json(const Estimate& e, const std::string& method) {
    nlohmann::json j;
    j["method"] = method;
    j["K"] = e.candidate.signals.count();
    j["L"] = e.candidate.signals.length();
    j["signals"] = e.candidate.signals.rows();
    j["weights"] = RealVector(e.candidate.weights.values().begin(), e.candidate.weights.values().end());
    j["weights_fixed"] = e.candidate.weights_fixed;
    j["cost"] = e.final_cost;
    j["diagnostics"] = {{"grad_norm", e.grad_norm},
                        {"iterations", e.iterations},
                        {"restart_index", e.restart_index},
                        {"status", e.status},
                        {"failed", e.failed}};
    return j;
}

Estimate estimate_from_json(const nlohmann::json& j) {
    try {
        Estimate e;
        e.candidate.signals = SignalSet(field(j, "signals").get<std::vector<RealVector>>());
        e.candidate.weights = MixingWeights(field(j, "weights").get<RealVector>());
        if (e.candidate.weights.size() != e.candidate.signals.count()) {
            throw FormatError("estimate: weights must have K entries");
        }
        e.candidate.weights_fixed = j.value("weights_fixed", false);
        e.final_cost = field(j, "cost").get<double>();
        if (j.contains("diagnostics")) {
            const auto& d = j.at("diagnostics");
            e.grad_norm = d.value("grad_norm", 0.0);
            e.iterations = d.value("iterations", 0);
            e.restart_index = d.value("restart_index", 0);
            e.status = d.value("status", std::string{});
            e.failed = d.value("failed", false);
        }
        return e;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("estimate: ") + e.what());
    } catch (const std::invalid_argument& e) {
        throw FormatError(std::string("estimate: ") + e.what());
    }
}

nlohmann::json read_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out << j.dump(2) << '\n';
}

}  // namespace hmra::io
