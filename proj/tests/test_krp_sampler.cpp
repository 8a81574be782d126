#include "doctest.h"

#include <cmath>
#include <functional>
#include <vector>

#include "krplev/dense_kernels.hpp"
#include "krplev/krp_sampler.hpp"
#include "reference.hpp"
#include "support.hpp"

using namespace krplev;
using testsupport::chi_square;
using testsupport::max_abs_diff;
using testsupport::random_matrix;
using testsupport::random_spiked_matrix;

namespace {

// Joint distribution implied by the sampler, assembled by chaining the exact
// conditional distributions over every reachable history. Multi-indices are
// linearized in ascending order (first included factor slowest).
std::vector<double> chained_joint(const KrpSampler& s, std::optional<std::size_t> excluded) {
    std::vector<std::size_t> inc;
    for (std::size_t k = 0; k < s.factor_count(); ++k)
        if (!excluded || *excluded != k) inc.push_back(k);

    std::uint64_t total = 1;
    for (std::size_t k : inc) total *= s.factor(k).rows;
    std::vector<double> joint(total, 0.0);

    const std::size_t R = s.rank();
    std::function<void(std::size_t, std::vector<double>, double, std::uint64_t)> walk =
        [&](std::size_t pos, std::vector<double> h, double prefix, std::uint64_t flat) {
            if (pos == inc.size()) {
                joint[flat] = prefix;
                return;
            }
            const std::size_t k = inc[pos];
            const ConditionalDistribution dist = s.conditional(excluded, k, h);
            for (std::size_t t = 0; t < dist.probabilities.size(); ++t) {
                const double p = dist.probabilities[t];
                if (p <= 0.0) continue;
                std::vector<double> hn(R);
                for (std::size_t c = 0; c < R; ++c) hn[c] = h[c] * s.factor(k)(t, c);
                walk(pos + 1, std::move(hn), prefix * p, flat * s.factor(k).rows + t);
            }
        };
    walk(0, std::vector<double>(R, 1.0), 1.0, 0);
    return joint;
}

std::vector<double> normalized_leverage(const Matrix& A) {
    std::vector<double> ell = ref::leverage_scores(A);
    double total = 0.0;
    for (double v : ell) total += v;
    for (double& v : ell) v /= total;
    return ell;
}

}  // namespace

TEST_CASE("construct caches factor Grams") {
    {
        const std::vector<Matrix> fs{Matrix::ones(2, 1), Matrix::ones(2, 1)};
        const KrpSampler s(fs);
        CHECK(s.factor_gram(0)(0, 0) == doctest::Approx(2.0));
        CHECK(s.factor_gram(1)(0, 0) == doctest::Approx(2.0));
    }
    {
        std::vector<Matrix> fs;
        for (int j = 0; j < 3; ++j) fs.push_back(random_matrix(8, 4, 600 + j));
        const KrpSampler s(fs);
        for (int j = 0; j < 3; ++j)
            CHECK(max_abs_diff(s.factor_gram(j), ref::gram_serial(fs[j])) <= 1e-12);
    }
    CHECK_THROWS(KrpSampler({Matrix::ones(2, 1), Matrix::ones(2, 2)}));
    CHECK_THROWS(KrpSampler({Matrix(2, 2), Matrix(2, 2)}));  // all-zero product
    CHECK_THROWS(KrpSampler(std::vector<Matrix>{}));
}

TEST_CASE("uniform leverage: all multi-indices equiprobable (chi-square)") {
    const KrpSampler s({Matrix::ones(2, 1), Matrix::ones(2, 1)});
    const SampleBatch batch = s.sample(std::nullopt, 40000, 610);
    std::vector<std::uint64_t> counts(4, 0);
    for (std::size_t d = 0; d < batch.count; ++d)
        counts[batch.flat_index(d, RowOrder::Ascending)]++;
    // df=3, alpha=0.01
    CHECK(chi_square(counts, std::vector<double>(4, 0.25), 40000) < 11.345);
    for (double q : batch.probabilities) CHECK(q == doctest::Approx(0.25));
}

TEST_CASE("identity factors: empirical distribution matches Eq-1 leverage") {
    const std::vector<Matrix> fs{Matrix::identity(2), Matrix::identity(2)};
    const KrpSampler s(fs);
    const Matrix A = ref::materialize_krp(fs, RowOrder::Ascending);
    const std::vector<double> q = normalized_leverage(A);

    const std::uint64_t n = 100000;
    const SampleBatch batch = s.sample(std::nullopt, n, 611);
    std::vector<std::uint64_t> counts(4, 0);
    for (std::size_t d = 0; d < n; ++d) counts[batch.flat_index(d, RowOrder::Ascending)]++;
    CHECK(ref::total_variation(q, counts, n) <= 0.01);
    // rows 1 and 2 of I2 (.) I2 are zero and must never be drawn
    CHECK(counts[1] == 0);
    CHECK(counts[2] == 0);
}

TEST_CASE("spiked Gaussian factors: 50k draws track the exact 512-point distribution") {
    std::vector<Matrix> fs;
    for (int j = 0; j < 3; ++j) fs.push_back(random_spiked_matrix(8, 8, 620 + j));
    const KrpSampler s(fs);
    const Matrix A = ref::materialize_krp(fs, RowOrder::Ascending);
    const std::vector<double> q = normalized_leverage(A);

    const std::uint64_t n = 50000;
    const SampleBatch batch = s.sample(std::nullopt, n, 621);
    std::vector<std::uint64_t> counts(512, 0);
    for (std::size_t d = 0; d < n; ++d) counts[batch.flat_index(d, RowOrder::Ascending)]++;
    // Multinomial noise floor for this instance sits near 0.033 even when
    // drawing from the exact distribution itself; a broken sampler lands far
    // above it.
    CHECK(ref::total_variation(q, counts, n) <= 0.05);
}

TEST_CASE("joint exactness: chained conditionals equal normalized leverage scores") {
    struct Config {
        std::vector<std::pair<std::size_t, std::size_t>> shapes;  // rows, cols
        std::optional<std::size_t> excluded;
    };
    const std::vector<Config> configs{
        {{{6, 2}, {5, 2}}, std::nullopt},
        {{{8, 3}, {7, 3}, {6, 3}}, std::nullopt},
        {{{4, 4}, {16, 4}, {9, 4}}, 1},
        {{{12, 2}, {3, 2}, {10, 2}}, 2},
    };
    std::uint64_t seed = 700;
    for (const Config& cfg : configs) {
        std::vector<Matrix> fs;
        for (const auto& [r, c] : cfg.shapes) fs.push_back(random_matrix(r, c, ++seed));
        const KrpSampler s(fs);
        const std::vector<double> joint = chained_joint(s, cfg.excluded);

        std::vector<Matrix> included;
        for (std::size_t k = 0; k < fs.size(); ++k)
            if (!cfg.excluded || *cfg.excluded != k) included.push_back(fs[k]);
        const Matrix A = ref::materialize_krp(included, RowOrder::Ascending);
        const std::vector<double> q = normalized_leverage(A);

        REQUIRE(joint.size() == q.size());
        CHECK(max_abs_diff(joint, q) <= 1e-8);
    }
}

TEST_CASE("conditional distribution matches the direct formula") {
    std::vector<Matrix> fs;
    for (int j = 0; j < 3; ++j) fs.push_back(random_matrix(7, 3, 710 + j));
    const KrpSampler s(fs);

    // direct evaluation of the conditional via enumeration with Y = G_{>k}
    const auto direct = [&](std::size_t k, const std::vector<double>& h) {
        Matrix g = Matrix::ones(3, 3);
        for (const Matrix& f : fs) {
            const Matrix gm = ref::gram_serial(f);
            for (std::size_t p = 0; p < 9; ++p) g.data[p] *= gm.data[p];
        }
        Matrix gk = pinv_psd(g);
        for (std::size_t m = k + 1; m < fs.size(); ++m) {
            const Matrix gm = ref::gram_serial(fs[m]);
            for (std::size_t p = 0; p < 9; ++p) gk.data[p] *= gm.data[p];
        }
        return ref::enumerate_q(fs[k], h, gk);
    };

    {
        const std::vector<double> h(3, 1.0);
        const ConditionalDistribution cd = s.conditional(std::nullopt, 0, h);
        CHECK(max_abs_diff(cd.probabilities, direct(0, h)) <= 1e-10);
        double wsum = 0.0;
        for (double w : cd.mixture_weights) wsum += w;
        CHECK(wsum == doctest::Approx(1.0).epsilon(1e-10));
    }
    {
        std::vector<double> h(3);
        for (std::size_t c = 0; c < 3; ++c) h[c] = fs[0](2, c);
        const ConditionalDistribution cd = s.conditional(std::nullopt, 1, h);
        CHECK(max_abs_diff(cd.probabilities, direct(1, h)) <= 1e-10);
        double wsum = 0.0;
        for (double w : cd.mixture_weights) wsum += w;
        CHECK(wsum == doctest::Approx(1.0).epsilon(1e-10));
    }
}

TEST_CASE("rank-1 downstream Gram collapses the mixture to one component") {
    // rank-1 factors: second column is a multiple of the first
    std::vector<Matrix> fs;
    for (int j = 0; j < 2; ++j) {
        Matrix u = random_matrix(6, 1, 720 + j);
        Matrix two(6, 2);
        for (std::size_t i = 0; i < 6; ++i) {
            two(i, 0) = u(i, 0);
            two(i, 1) = 2.0 * u(i, 0);
        }
        fs.push_back(two);
    }
    const KrpSampler s(fs);
    const std::vector<double> h(2, 1.0);
    const ConditionalDistribution cd = s.conditional(std::nullopt, 1, h);
    std::size_t live = 0;
    for (double w : cd.mixture_weights)
        if (w > 1e-12) ++live;
    CHECK(live == 1);

    Matrix g = Matrix::ones(2, 2);
    for (const Matrix& f : fs) {
        const Matrix gm = ref::gram_serial(f);
        for (std::size_t p = 0; p < 4; ++p) g.data[p] *= gm.data[p];
    }
    const Matrix gk = pinv_psd(g);
    CHECK(max_abs_diff(cd.probabilities, ref::enumerate_q(fs[1], h, gk)) <= 1e-10);
}

TEST_CASE("leverage scores of the oracle sum to the rank") {
    std::vector<Matrix> fs;
    for (int j = 0; j < 2; ++j) fs.push_back(random_matrix(6, 3, 730 + j));
    const Matrix A = ref::materialize_krp(fs, RowOrder::Ascending);
    const std::vector<double> ell = ref::leverage_scores(A);
    double total = 0.0;
    for (double v : ell) total += v;
    CHECK(total == doctest::Approx(3.0).epsilon(1e-10));
}

TEST_CASE("exclusion consistency: excluding j equals a sampler built without it") {
    std::vector<Matrix> fs;
    for (int j = 0; j < 3; ++j) fs.push_back(random_matrix(9, 3, 740 + j));
    const KrpSampler full(fs);
    const KrpSampler reduced({fs[0], fs[2]});

    const std::size_t J = 500;
    const SampleBatch a = full.sample(1, J, 741);
    const SampleBatch b = reduced.sample(std::nullopt, J, 741);
    for (std::size_t d = 0; d < J; ++d) {
        CHECK(a.index(d, 0) == b.index(d, 0));
        CHECK(a.index(d, 2) == b.index(d, 1));
        CHECK(a.probabilities[d] == doctest::Approx(b.probabilities[d]).epsilon(1e-12));
    }
}

TEST_CASE("update_factor rebuilds only the touched factor") {
    std::vector<Matrix> fs;
    for (int j = 0; j < 3; ++j) fs.push_back(random_matrix(8, 4, 750 + j));
    KrpSampler s(fs);
    const Matrix g0 = s.factor_gram(0), g1 = s.factor_gram(1);

    const Matrix unew = random_matrix(8, 4, 753);
    s.update_factor(2, unew);
    CHECK(max_abs_diff(s.factor_gram(0), g0) == 0.0);
    CHECK(max_abs_diff(s.factor_gram(1), g1) == 0.0);
    CHECK(max_abs_diff(s.factor_gram(2), ref::gram_serial(unew)) <= 1e-12);

    // matches a fresh sampler on the updated factors under the same seed
    std::vector<Matrix> fs2 = fs;
    fs2[2] = unew;
    const KrpSampler fresh(fs2);
    const SampleBatch a = s.sample(std::nullopt, 300, 754);
    const SampleBatch b = fresh.sample(std::nullopt, 300, 754);
    CHECK(a.indices == b.indices);

    // update to an identical matrix leaves seeded draws unchanged
    KrpSampler t(fs2);
    t.update_factor(1, fs2[1]);
    const SampleBatch c = t.sample(std::nullopt, 300, 754);
    CHECK(c.indices == b.indices);
}

TEST_CASE("update_factor_entry keeps Grams and draws consistent") {
    std::vector<Matrix> fs;
    for (int j = 0; j < 2; ++j) fs.push_back(random_matrix(10, 3, 760 + j));
    KrpSampler s(fs);

    // no-op
    s.update_factor_entry(0, 4, 1, fs[0](4, 1));
    CHECK(max_abs_diff(s.factor_gram(0), ref::gram_serial(fs[0])) <= 1e-12);

    // single change
    fs[0](4, 1) = -2.5;
    s.update_factor_entry(0, 4, 1, -2.5);
    CHECK(max_abs_diff(s.factor_gram(0), ref::gram_serial(fs[0])) <= 1e-12);
    s.validate();

    // 20 random single-entry changes, then compare to a fresh build
    CounterRng rng(762);
    for (int k = 0; k < 20; ++k) {
        const std::size_t j = static_cast<std::size_t>(rng.uniform() * 2);
        const std::size_t r = static_cast<std::size_t>(rng.uniform() * 10);
        const std::size_t c = static_cast<std::size_t>(rng.uniform() * 3);
        const double v = rng.normal();
        fs[j](r, c) = v;
        s.update_factor_entry(j, r, c, v);
    }
    s.validate();
    const KrpSampler fresh(fs);
    const SampleBatch a = s.sample(std::nullopt, 400, 763);
    const SampleBatch b = fresh.sample(std::nullopt, 400, 763);
    CHECK(a.indices == b.indices);
}

TEST_CASE("flat row linearization follows the declared ordering") {
    std::vector<Matrix> fs{random_matrix(2, 2, 770), random_matrix(3, 2, 771),
                           random_matrix(4, 2, 772)};
    const KrpSampler s(fs);
    const SampleBatch batch = s.sample(std::nullopt, 50, 773);
    for (std::size_t d = 0; d < batch.count; ++d) {
        const std::uint64_t asc = batch.flat_index(d, RowOrder::Ascending);
        const std::uint64_t rev = batch.flat_index(d, RowOrder::Reversed);
        const std::uint64_t i0 = batch.index(d, 0), i1 = batch.index(d, 1),
                            i2 = batch.index(d, 2);
        CHECK(asc == (i0 * 3 + i1) * 4 + i2);
        CHECK(rev == (i2 * 3 + i1) * 2 + i0);
    }
}

TEST_CASE("sampled rows are Hadamard products of the drawn factor rows") {
    std::vector<Matrix> fs{random_matrix(5, 3, 780), random_matrix(6, 3, 781)};
    const KrpSampler s(fs);
    const SampleBatch batch = s.sample(std::nullopt, 100, 782);
    const Matrix A = ref::materialize_krp(fs, RowOrder::Ascending);
    for (std::size_t d = 0; d < batch.count; ++d) {
        const std::uint64_t flat = batch.flat_index(d, RowOrder::Ascending);
        for (std::size_t c = 0; c < 3; ++c)
            CHECK(batch.rows(d, c) == doctest::Approx(A(flat, c)).epsilon(1e-12));
    }
}
