#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>

#include <json.hpp>

#include "hetmra/em.hpp"
#include "hetmra/moments.hpp"
#include "hetmra/simulate.hpp"
#include "hetmra/solver.hpp"

namespace hmra::io {

/// Raised for malformed or inconsistent input files.
class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Raised when a file cannot be opened, read or written.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Binary observation file, little-endian:
///   "MRA1" | u32 L | u64 N | f64 sigma | N * L f64, row-major.
struct ObservationHeader {
    std::uint32_t L = 0;
    std::uint64_t N = 0;
    double sigma = 0.0;
};

inline constexpr std::size_t kObservationHeaderBytes = 24;

class ObservationWriter {
public:
    ObservationWriter(const std::filesystem::path& path, const ObservationHeader& header);
    void write(const ObservationBatch& batch);
    /// Throws unless exactly header.N records were written.
    void close();

private:
    std::ofstream out_;
    ObservationHeader header_;
    std::uint64_t written_ = 0;
};

class ObservationReader {
public:
    explicit ObservationReader(const std::filesystem::path& path);
    [[nodiscard]] const ObservationHeader& header() const noexcept { return header_; }
    /// Reads up to max_count records; returns the number read (0 at end of file).
    std::size_t read(std::size_t max_count, ObservationBatch& out);
    void rewind();

private:
    std::filesystem::path path_;
    std::ifstream in_;
    ObservationHeader header_;
    std::uint64_t read_ = 0;
};

/// Replays an observation file batch by batch (for multi-pass algorithms such as EM).
class ObservationFileSource final : public ObservationSource {
public:
    explicit ObservationFileSource(std::filesystem::path path);
    [[nodiscard]] std::size_t length() const override { return header_.L; }
    [[nodiscard]] std::uint64_t size() const override { return header_.N; }
    [[nodiscard]] double sigma() const noexcept { return header_.sigma; }
    void for_each_batch(std::size_t batch_size,
                        const std::function<void(const ObservationBatch&)>& fn) const override;

private:
    std::filesystem::path path_;
    ObservationHeader header_;
};

/// Label sidecar: CSV with header "shift,class", class numbered 1..K.
void write_labels(std::ostream& out, const ObservationBatch& batch);

nlohmann::json to_json(const InvariantFeatures& f);
InvariantFeatures features_from_json(const nlohmann::json& j);

nlohmann::json to_json(const GroundTruth& truth);
GroundTruth truth_from_json(const nlohmann::json& j);

nlohmann::json to_json(const Estimate& e, const std::string& method);
Estimate estimate_from_json(const nlohmann::json& j);

nlohmann::json read_json(const std::filesystem::path& path);
void write_json(const std::filesystem::path& path, const nlohmann::json& j);

}  // namespace hmra::io
