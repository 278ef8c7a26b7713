#include "fdepi/iwt.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "fdepi/error.hpp"
#include "fdepi/parallel.hpp"
#include "fdepi/rng.hpp"

namespace fdepi {

namespace {

constexpr std::size_t kChunks = 64;

// Observed and relabelled statistics are compared with a relative slack so
// that arrangements equal to the observed one up to rounding count as ties.
bool at_least(double permuted, double observed) { return permuted >= observed - 1e-12 * std::max(1.0, observed); }

struct Pooled {
    Eigen::MatrixXd curves;  // group A rows first
    std::size_t size_a;
};

Pooled pool(const FunctionalDataset& a, const FunctionalDataset& b) {
    if (a.size() == 0 || b.size() == 0) throw ValidationError("interval test: both groups need at least one curve");
    if (a.length() != b.length())
        throw ValidationError("interval test: groups have " + std::to_string(a.length()) + " and " +
                              std::to_string(b.length()) + " days");
    // Canonical group order (smaller first, then by content) so the result
    // does not depend on which group is passed first.
    const FunctionalDataset* first = &a;
    const FunctionalDataset* second = &b;
    auto lex_less = [](const Eigen::MatrixXd& x, const Eigen::MatrixXd& y) {
        return std::lexicographical_compare(x.data(), x.data() + x.size(), y.data(), y.data() + y.size());
    };
    if (b.size() < a.size() || (b.size() == a.size() && lex_less(b.values(), a.values()))) std::swap(first, second);
    Pooled p;
    p.size_a = first->size();
    p.curves.resize(static_cast<Eigen::Index>(a.size() + b.size()), static_cast<Eigen::Index>(a.length()));
    p.curves.topRows(first->values().rows()) = first->values();
    p.curves.bottomRows(second->values().rows()) = second->values();
    return p;
}

// |mean over rows in `in_a` - mean over the rest| per day, as prefix sums.
Eigen::VectorXd prefix_of_gap(const Eigen::MatrixXd& curves, const std::vector<char>& in_a, std::size_t size_a) {
    const Eigen::Index T = curves.cols();
    Eigen::RowVectorXd sum_a = Eigen::RowVectorXd::Zero(T), sum_all = curves.colwise().sum();
    for (Eigen::Index i = 0; i < curves.rows(); ++i)
        if (in_a[static_cast<std::size_t>(i)]) sum_a += curves.row(i);
    const double na = static_cast<double>(size_a), nb = static_cast<double>(curves.rows()) - na;
    Eigen::VectorXd prefix(T + 1);
    prefix(0) = 0.0;
    for (Eigen::Index t = 0; t < T; ++t) prefix(t + 1) = prefix(t) + std::abs(sum_a(t) / na - (sum_all(t) - sum_a(t)) / nb);
    return prefix;
}

// Calls fn(in_a) for every relabelling: all subsets when exact, otherwise
// `count` shuffles drawn from per-replicate sub-streams. Work is split into a
// fixed number of chunks; fn gets the chunk index for its accumulator.
template <typename Fn>
void for_each_relabelling(std::size_t n, std::size_t size_a, bool exact, std::size_t count, std::uint64_t seed,
                          std::size_t threads, Fn&& fn) {
    if (exact) {
        // Enumerate subsets in lexicographic order, chunked by leading index.
        std::vector<std::vector<std::size_t>> all;
        std::vector<std::size_t> pick(size_a);
        std::iota(pick.begin(), pick.end(), 0);
        for (;;) {
            all.push_back(pick);
            std::size_t j = size_a;
            while (j > 0 && pick[j - 1] == n - size_a + j - 1) --j;
            if (j == 0) break;
            ++pick[j - 1];
            for (std::size_t m = j; m < size_a; ++m) pick[m] = pick[m - 1] + 1;
        }
        const std::size_t per = (all.size() + kChunks - 1) / kChunks;
        parallel_for(kChunks, threads, [&](std::size_t chunk) {
            std::vector<char> in_a(n);
            for (std::size_t r = chunk * per; r < std::min(all.size(), (chunk + 1) * per); ++r) {
                std::fill(in_a.begin(), in_a.end(), 0);
                for (auto i : all[r]) in_a[i] = 1;
                fn(chunk, in_a);
            }
        });
        return;
    }
    const std::size_t per = (count + kChunks - 1) / kChunks;
    parallel_for(kChunks, threads, [&](std::size_t chunk) {
        std::vector<char> in_a(n);
        std::vector<std::size_t> order(n);
        for (std::size_t r = chunk * per; r < std::min(count, (chunk + 1) * per); ++r) {
            Rng rng = Rng::substream(seed, r);
            std::iota(order.begin(), order.end(), 0);
            rng.shuffle(order);
            std::fill(in_a.begin(), in_a.end(), 0);
            for (std::size_t m = 0; m < size_a; ++m) in_a[order[m]] = 1;
            fn(chunk, in_a);
        }
    });
}

struct Plan {
    bool exact;
    std::size_t relabellings;
};

Plan plan(std::size_t n, std::size_t size_a, const IwtOptions& o) {
    const std::size_t total = binomial_capped(n, size_a, o.exact_limit);
    if (!o.force_monte_carlo && total <= o.exact_limit) return {true, total};
    if (o.permutations < 100)
        throw ValidationError("interval test: " + std::to_string(o.permutations) +
                              " permutations requested; at least 100 are needed for stable p-values");
    return {false, o.permutations};
}

double p_value(std::size_t hits, const Plan& p) {
    return p.exact ? static_cast<double>(hits) / static_cast<double>(p.relabellings)
                   : static_cast<double>(hits + 1) / static_cast<double>(p.relabellings + 1);
}

}  // namespace

std::size_t binomial_capped(std::size_t n, std::size_t k, std::size_t limit) {
    if (k > n) return 0;
    k = std::min(k, n - k);
    // Exact running product; C(n, j) grows monotonically for j <= n/2.
    unsigned long long c = 1;
    for (std::size_t j = 1; j <= k; ++j) {
        c = c * (n - k + j) / j;
        if (c > limit) return limit + 1;
    }
    return static_cast<std::size_t>(c);
}

double interval_statistic(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, std::size_t start, std::size_t len) {
    if (len == 0 || start + len > static_cast<std::size_t>(a.cols()) || a.cols() != b.cols())
        throw ValidationError("interval test: interval outside the grid");
    const auto s = static_cast<Eigen::Index>(start), l = static_cast<Eigen::Index>(len);
    return (a.middleCols(s, l).colwise().mean() - b.middleCols(s, l).colwise().mean()).cwiseAbs().sum();
}

double interval_p(const FunctionalDataset& a, const FunctionalDataset& b, std::size_t start, std::size_t len,
                  const IwtOptions& options) {
    const Pooled pooled = pool(a, b);
    const auto n = static_cast<std::size_t>(pooled.curves.rows());
    if (len == 0 || start + len > a.length()) throw ValidationError("interval test: interval outside the grid");
    const Plan p = plan(n, pooled.size_a, options);
    std::vector<char> observed_split(n, 0);
    std::fill(observed_split.begin(), observed_split.begin() + static_cast<std::ptrdiff_t>(pooled.size_a), 1);
    const auto obs_prefix = prefix_of_gap(pooled.curves, observed_split, pooled.size_a);
    const double observed = obs_prefix(static_cast<Eigen::Index>(start + len)) - obs_prefix(static_cast<Eigen::Index>(start));
    std::vector<std::size_t> hits(kChunks, 0);
    for_each_relabelling(n, pooled.size_a, p.exact, p.relabellings, options.seed, options.threads,
                         [&](std::size_t chunk, const std::vector<char>& in_a) {
                             const auto pre = prefix_of_gap(pooled.curves, in_a, pooled.size_a);
                             const double stat = pre(static_cast<Eigen::Index>(start + len)) - pre(static_cast<Eigen::Index>(start));
                             hits[chunk] += at_least(stat, observed);
                         });
    return p_value(std::accumulate(hits.begin(), hits.end(), std::size_t{0}), p);
}

IntervalTestResult iwt(const FunctionalDataset& a, const FunctionalDataset& b, const IwtOptions& options) {
    const Pooled pooled = pool(a, b);
    const auto n = static_cast<std::size_t>(pooled.curves.rows());
    const std::size_t T = a.length();
    const auto Ti = static_cast<Eigen::Index>(T);
    const Plan p = plan(n, pooled.size_a, options);

    std::vector<char> observed_split(n, 0);
    std::fill(observed_split.begin(), observed_split.begin() + static_cast<std::ptrdiff_t>(pooled.size_a), 1);
    const Eigen::VectorXd obs = prefix_of_gap(pooled.curves, observed_split, pooled.size_a);

    using Counts = Eigen::Matrix<std::size_t, Eigen::Dynamic, Eigen::Dynamic>;
    std::vector<Counts> hits(kChunks, Counts::Zero(Ti, Ti));
    for_each_relabelling(n, pooled.size_a, p.exact, p.relabellings, options.seed, options.threads,
                         [&](std::size_t chunk, const std::vector<char>& in_a) {
                             const auto pre = prefix_of_gap(pooled.curves, in_a, pooled.size_a);
                             auto& h = hits[chunk];
                             for (Eigen::Index s = 0; s < Ti; ++s)
                                 for (Eigen::Index l = 1; s + l <= Ti; ++l)
                                     h(s, l - 1) += at_least(pre(s + l) - pre(s), obs(s + l) - obs(s));
                         });
    Counts total = Counts::Zero(Ti, Ti);
    for (const auto& h : hits) total += h;

    IntervalTestResult r;
    r.length = T;
    r.exact = p.exact;
    r.n_permutations = p.relabellings;
    r.raw_p = Eigen::MatrixXd::Constant(Ti, Ti, std::numeric_limits<double>::quiet_NaN());
    for (Eigen::Index s = 0; s < Ti; ++s)
        for (Eigen::Index l = 1; s + l <= Ti; ++l) r.raw_p(s, l - 1) = p_value(total(s, l - 1), p);

    // widest(t, w): max raw p over intervals of length exactly w containing t.
    r.adjusted_p.resize(Ti, Ti);
    for (Eigen::Index t = 0; t < Ti; ++t) {
        double running = 0.0;
        for (Eigen::Index w = 1; w <= Ti; ++w) {
            for (Eigen::Index s = std::max<Eigen::Index>(0, t - w + 1); s <= t && s + w <= Ti; ++s)
                running = std::max(running, r.raw_p(s, w - 1));
            r.adjusted_p(t, w - 1) = running;
        }
    }
    return r;
}

}  // namespace fdepi
