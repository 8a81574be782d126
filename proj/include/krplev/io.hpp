#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "krplev/tensor.hpp"

namespace krplev {

// FROSTT-style .tns ingestion and the plain-text model format.

enum class ValuePreprocess { None, Log };

struct TnsOptions {
    // Mode sizes; when absent they come from a "# dims ..." header comment or
    // are inferred as the per-mode maximum coordinate.
    std::optional<std::vector<std::uint64_t>> dims;
    // Log preprocessing maps v -> log(1 + v) so zero stays zero.
    ValuePreprocess preprocess = ValuePreprocess::None;
};

// Each data line holds N 1-based integer coordinates and one value,
// whitespace-separated; '#' starts a comment line; duplicate coordinates are
// summed. Malformed input throws std::runtime_error naming the line number.
SparseTensorCoo parse_tns(std::istream& in, const TnsOptions& opts = {});
SparseTensorCoo parse_tns_file(const std::string& path, const TnsOptions& opts = {});

// Model text format: one line of R weights, then per factor a "rows cols"
// header followed by the rows.
void write_model(std::ostream& out, const KruskalTensor& model);
void write_model_file(const std::string& path, const KruskalTensor& model);
KruskalTensor read_model(std::istream& in);
KruskalTensor read_model_file(const std::string& path);

void write_tns(std::ostream& out, const SparseTensorCoo& tensor);

}  // namespace krplev
