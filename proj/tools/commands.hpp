#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "krplev/tensor.hpp"

namespace krplev::cli {

using nlohmann::json;

// Each command returns a run record: command name, config echo, seed, phase
// wall times, a metric series, and summary metrics. Re-running with the same
// seed reproduces everything except the wall times bit-for-bit.

struct DistCheckParams {
    std::size_t modes = 3;
    std::size_t dim = 8;
    std::size_t rank = 8;
    std::size_t samples = 50000;
    bool perturb = false;  // multiply ~1% of factor entries by 10
    std::uint64_t seed = 0;
};
json cmd_dist_check(const DistCheckParams& p);

struct RuntimeBenchParams {
    std::size_t modes = 3;
    std::size_t rank = 16;
    std::vector<std::size_t> dims{1024, 16384, 262144};
    std::size_t samples = 20000;
    std::size_t trials = 5;
    std::uint64_t seed = 0;
    int threads = 0;  // 0 keeps the ambient OpenMP setting
};
json cmd_runtime_bench(const RuntimeBenchParams& p);

struct LstsqBenchParams {
    std::size_t modes = 4;
    std::size_t dim = 16;
    std::size_t rank = 8;
    std::size_t samples = 2000;
    std::size_t trials = 50;
    std::string sampler = "exact";  // exact | product
    std::uint64_t seed = 0;
};
json cmd_lstsq_bench(const LstsqBenchParams& p);

struct DecomposeParams {
    std::string input;  // .tns path; empty selects the synthetic generator
    std::vector<std::uint64_t> synthetic_dims{16, 16, 16};
    std::size_t synthetic_rank = 4;
    double synthetic_noise = 1e-3;
    std::size_t rank = 4;
    std::string solver = "exact";  // exact | sts-cp | cp-arls-lev
    std::size_t samples = 4096;
    std::size_t max_rounds = 40;
    std::size_t epoch_length = 5;
    double tolerance = 1e-4;
    std::string preprocess = "none";  // none | log
    bool oracle_epsilon = false;
    std::string model_output;  // model file path, optional
    std::uint64_t seed = 0;
};
json cmd_decompose(const DecomposeParams& p);

// Ground-truth Kruskal model with Gaussian factors plus additive Gaussian
// noise at the given relative level.
DenseTensor synthetic_dense(const std::vector<std::uint64_t>& dims, std::size_t rank,
                            double noise, std::uint64_t seed);

// Flattens a record's "series" array to CSV (header from the first row).
std::string series_csv(const json& record);

}  // namespace krplev::cli
