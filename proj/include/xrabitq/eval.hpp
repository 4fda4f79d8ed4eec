#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <queue>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "xrabitq/baselines.hpp"
#include "xrabitq/estimator.hpp"
#include "xrabitq/io.hpp"
#include "xrabitq/ivf.hpp"
#include "xrabitq/quantizer.hpp"
#include "xrabitq/rng.hpp"

namespace xrabitq {

/// Exact brute-force K-NN under squared Euclidean distance, ties broken by
/// smaller id. This is the oracle every recall figure is measured against.
inline std::vector<std::vector<std::uint64_t>> ground_truth(const Dataset& data,
                                                            const Dataset& queries,
                                                            std::uint32_t k) {
    if (data.dim != queries.dim) {
        throw std::invalid_argument("ground_truth: dimension mismatch");
    }
    if (k == 0) throw std::invalid_argument("ground_truth: k must be >= 1");
    const std::size_t k_eff = std::min<std::size_t>(k, data.count);

    struct Entry {
        double d;
        std::uint64_t id;
    };
    struct WorseOrder {
        bool operator()(const Entry& a, const Entry& b) const {
            return a.d < b.d || (a.d == b.d && a.id < b.id);
        }
    };

    std::vector<std::vector<std::uint64_t>> out(queries.count);
    detail::parallel_for(queries.count, [&](std::size_t qi) {
        std::priority_queue<Entry, std::vector<Entry>, WorseOrder> heap;
        const float* q = queries.values.data() + qi * queries.dim;
        for (std::size_t i = 0; i < data.count; ++i) {
            const double d = detail::l2_sq(q, data.values.data() + i * data.dim, data.dim);
            const Entry e{d, static_cast<std::uint64_t>(i)};
            if (heap.size() < k_eff) {
                heap.push(e);
            } else {
                const Entry& top = heap.top();
                if (e.d < top.d || (e.d == top.d && e.id < top.id)) {
                    heap.pop();
                    heap.push(e);
                }
            }
        }
        std::vector<Entry> sorted;
        sorted.reserve(heap.size());
        while (!heap.empty()) {
            sorted.push_back(heap.top());
            heap.pop();
        }
        std::sort(sorted.begin(), sorted.end(), [](const Entry& a, const Entry& b) {
            return a.d < b.d || (a.d == b.d && a.id < b.id);
        });
        out[qi].reserve(sorted.size());
        for (const Entry& e : sorted) out[qi].push_back(e.id);
    });
    return out;
}

struct EvalReport {
    double recall = 0.0;
    double avg_distance_ratio = 1.0;
    double qps = 0.0;  // 0 when timing was disabled (multi-threaded run)
    std::uint64_t stage1_evals = 0;
    std::uint64_t stage2_evals = 0;
    std::uint64_t pruned = 0;
};

namespace detail {

struct QueryScore {
    double recall = 0.0;
    double ratio = 1.0;
};

/// Recall and distance ratio of one retrieved list against the exact oracle.
/// Ratios compare the j-th best retrieved (by true distance) against the j-th
/// true neighbor; 0/0 counts as 1.
inline QueryScore score_query(const Dataset& data, const Dataset& queries,
                              std::size_t qi, std::span<const std::uint64_t> gt_row,
                              std::span<const std::uint64_t> retrieved,
                              std::size_t k_eff) {
    QueryScore score;
    std::vector<std::uint64_t> truth(gt_row.begin(), gt_row.begin() + k_eff);
    std::sort(truth.begin(), truth.end());
    std::size_t hits = 0;
    for (std::uint64_t id : retrieved) {
        if (std::binary_search(truth.begin(), truth.end(), id)) ++hits;
    }
    score.recall = static_cast<double>(hits) / static_cast<double>(k_eff);

    std::vector<double> retrieved_d(retrieved.size());
    for (std::size_t j = 0; j < retrieved.size(); ++j) {
        retrieved_d[j] = detail::l2_sq(queries.values.data() + qi * queries.dim,
                                       data.values.data() + retrieved[j] * data.dim,
                                       data.dim);
    }
    std::sort(retrieved_d.begin(), retrieved_d.end());
    const std::size_t depth = std::min(retrieved_d.size(), k_eff);
    if (depth == 0) return score;
    double sum = 0.0;
    for (std::size_t j = 0; j < depth; ++j) {
        const double true_d =
            detail::l2_sq(queries.values.data() + qi * queries.dim,
                          data.values.data() + gt_row[j] * data.dim, data.dim);
        if (true_d == 0.0) {
            sum += retrieved_d[j] == 0.0 ? 1.0 : std::numeric_limits<double>::infinity();
        } else {
            sum += std::sqrt(retrieved_d[j] / true_d);
        }
    }
    score.ratio = sum / static_cast<double>(depth);
    return score;
}

}  // namespace detail

/// Runs the query set against the index and scores it against the exact
/// oracle. Requires ids in the index to be row indexes into `data` (the CLI
/// always builds them that way). Queries run sequentially on one thread
/// unless `threads` > 1, in which case QPS is not reported.
inline EvalReport eval_search(const IvfIndex& index, const Dataset& data,
                              const Dataset& queries,
                              const std::vector<std::vector<std::uint64_t>>& gt,
                              const SearchParams& params, unsigned threads = 1) {
    if (gt.size() != queries.count) {
        throw std::invalid_argument("eval_search: ground truth count does not match queries");
    }
    const std::size_t k_eff = std::min<std::size_t>(params.k, data.count);
    for (const auto& row : gt) {
        if (row.size() < k_eff) {
            throw std::invalid_argument("eval_search: ground truth depth below k");
        }
    }

    std::vector<SearchResult> results(queries.count);
    double elapsed_sec = 0.0;
    if (threads <= 1) {
        const auto t0 = std::chrono::steady_clock::now();
        for (std::size_t qi = 0; qi < queries.count; ++qi) {
            results[qi] = index.search(queries.row(qi), params);
        }
        elapsed_sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    } else {
        detail::parallel_for(queries.count, [&](std::size_t qi) {
            results[qi] = index.search(queries.row(qi), params);
        });
    }

    EvalReport report;
    double recall_sum = 0.0;
    double ratio_sum = 0.0;
    for (std::size_t qi = 0; qi < queries.count; ++qi) {
        const SearchResult& r = results[qi];
        report.stage1_evals += r.stats.stage1_evals;
        report.stage2_evals += r.stats.stage2_evals;
        report.pruned += r.stats.pruned;
        const detail::QueryScore score =
            detail::score_query(data, queries, qi, gt[qi], r.ids, k_eff);
        recall_sum += score.recall;
        ratio_sum += score.ratio;
    }
    report.recall = recall_sum / static_cast<double>(queries.count);
    report.avg_distance_ratio = ratio_sum / static_cast<double>(queries.count);
    report.qps = (threads <= 1 && elapsed_sec > 0.0)
                     ? static_cast<double>(queries.count) / elapsed_sec
                     : 0.0;
    return report;
}

enum class ErrorMethod { xrabitq, xrabitq_padded_reference, sq, lvq };

inline ErrorMethod parse_error_method(const std::string& name) {
    if (name == "xrabitq") return ErrorMethod::xrabitq;
    if (name == "xrabitq-padded-reference") return ErrorMethod::xrabitq_padded_reference;
    if (name == "sq") return ErrorMethod::sq;
    if (name == "lvq") return ErrorMethod::lvq;
    throw std::invalid_argument("unknown method: " + name);
}

struct ErrorStats {
    double mean_rel_error = 0.0;
    double max_rel_error = 0.0;
    std::uint64_t pairs = 0;
};

namespace detail {

/// Uniformly samples up to max_count of the first `total` integers, in
/// ascending order, via geometric skips (expected-count Bernoulli capped at
/// max_count).
inline std::vector<std::uint64_t> sample_indices(std::uint64_t total,
                                                 std::uint64_t max_count,
                                                 RandomSource& rng) {
    std::vector<std::uint64_t> out;
    if (total <= max_count) {
        out.resize(total);
        for (std::uint64_t i = 0; i < total; ++i) out[i] = i;
        return out;
    }
    out.reserve(max_count);
    const double p = static_cast<double>(max_count) / static_cast<double>(total);
    const double log1mp = std::log1p(-p);
    std::uint64_t i = 0;
    while (i < total && out.size() < max_count) {
        out.push_back(i);
        const double u = std::max(rng.uniform01(), 1e-300);
        const double skip = std::floor(std::log(u) / log1mp);
        i += 1 + static_cast<std::uint64_t>(std::min(skip, 1e18));
    }
    return out;
}

}  // namespace detail

/// Relative errors of squared-distance estimates over sampled (query, data)
/// pairs, centered on the global data centroid. The padded-reference method
/// zero-pads to bits*D dimensions and runs 1-bit quantization; SQ and LVQ
/// reconstruct the data vector and measure exact distances to the raw
/// (centered) query.
inline ErrorStats eval_error(const Dataset& data, const Dataset& queries,
                             ErrorMethod method, std::uint32_t bits,
                             std::uint64_t seed,
                             std::uint64_t max_pairs = 10'000'000) {
    if (data.dim != queries.dim) {
        throw std::invalid_argument("eval_error: dimension mismatch");
    }
    if (data.count == 0 || queries.count == 0) {
        throw std::invalid_argument("eval_error: empty data or queries");
    }

    std::vector<float> centroid(data.dim, 0.0f);
    {
        std::vector<double> acc(data.dim, 0.0);
        for (std::size_t i = 0; i < data.count; ++i) {
            const float* row = data.values.data() + i * data.dim;
            for (std::uint32_t d = 0; d < data.dim; ++d) acc[d] += row[d];
        }
        for (std::uint32_t d = 0; d < data.dim; ++d) {
            centroid[d] = static_cast<float>(acc[d] / static_cast<double>(data.count));
        }
    }

    RandomSource rng(derive_stream_seed(seed, 0x65727201ull));
    const std::uint64_t total =
        static_cast<std::uint64_t>(data.count) * static_cast<std::uint64_t>(queries.count);
    const std::vector<std::uint64_t> picks = detail::sample_indices(total, max_pairs, rng);

    // Which rows participate at all (encode each at most once).
    std::vector<std::uint8_t> data_used(data.count, 0);
    std::vector<std::uint8_t> query_used(queries.count, 0);
    for (std::uint64_t p : picks) {
        data_used[p % data.count] = 1;
        query_used[p / data.count] = 1;
    }

    const std::uint32_t target_dim =
        method == ErrorMethod::xrabitq_padded_reference
            ? bits * padded_dim(data.dim)
            : padded_dim(data.dim);
    const std::uint32_t enc_bits =
        method == ErrorMethod::xrabitq_padded_reference ? 1 : bits;

    Dataset data_pad;
    Dataset query_pad;
    RandomRotator rotator;
    QuantizationConfig config;
    std::vector<QuantizedVector> encoded(data.count);
    std::vector<QueryContext> contexts(queries.count);

    std::vector<std::vector<double>> decoded(data.count);
    std::vector<std::vector<double>> query_centered(queries.count);
    SqModel sq_model;

    if (method == ErrorMethod::xrabitq || method == ErrorMethod::xrabitq_padded_reference) {
        config.bits_per_dim = enc_bits;
        config.dim = target_dim;
        rotator = RandomRotator::sample(target_dim, derive_stream_seed(seed, 0x65727202ull));
        data_pad = pad_dataset(data, target_dim);
        query_pad = pad_dataset(queries, target_dim);
        const Dataset centroid_pad = pad_dataset(
            Dataset{data.dim, 1, std::vector<float>(centroid.begin(), centroid.end()), ""},
            target_dim);
        detail::parallel_for(data.count, [&](std::size_t i) {
            if (data_used[i]) {
                encoded[i] = encode_vector(data_pad.row(i), centroid_pad.row(0), rotator, config);
            }
        });
        for (std::size_t qi = 0; qi < queries.count; ++qi) {
            if (query_used[qi]) {
                contexts[qi] = preprocess_query(query_pad.row(qi), centroid_pad.row(0),
                                                rotator, config);
            }
        }
    } else {
        std::vector<float> data_centered;
        data_centered.resize(data.values.size());
        for (std::size_t i = 0; i < data.count; ++i) {
            const float* row = data.values.data() + i * data.dim;
            float* out = data_centered.data() + i * data.dim;
            for (std::uint32_t d = 0; d < data.dim; ++d) out[d] = row[d] - centroid[d];
        }
        if (method == ErrorMethod::sq) {
            sq_model = sq_fit(data_centered, bits);
        }
        for (std::size_t i = 0; i < data.count; ++i) {
            if (!data_used[i]) continue;
            std::span<const float> row{data_centered.data() + i * data.dim, data.dim};
            decoded[i] = method == ErrorMethod::sq
                             ? sq_decode(sq_model, sq_encode(sq_model, row))
                             : lvq_decode(lvq_encode(row, bits));
        }
        for (std::size_t qi = 0; qi < queries.count; ++qi) {
            if (!query_used[qi]) continue;
            query_centered[qi].resize(queries.dim);
            const float* row = queries.values.data() + qi * queries.dim;
            for (std::uint32_t d = 0; d < queries.dim; ++d) {
                query_centered[qi][d] = static_cast<double>(row[d]) - centroid[d];
            }
        }
    }

    ErrorStats stats;
    double sum = 0.0;
    for (std::uint64_t p : picks) {
        const std::size_t di = p % data.count;
        const std::size_t qi = p / data.count;
        const double true_sq = detail::l2_sq(data.values.data() + di * data.dim,
                                             queries.values.data() + qi * queries.dim,
                                             data.dim);
        if (true_sq == 0.0) continue;

        double est;
        if (method == ErrorMethod::xrabitq || method == ErrorMethod::xrabitq_padded_reference) {
            const QuantizedVector& qv = encoded[di];
            const QueryContext& qc = contexts[qi];
            est = enc_bits > 1
                      ? stage2_estimate(qv, qc, stage1_ip(qv.code.msb_plane, qc)).est_sqdist
                      : stage1_estimate(qv, qc).est_sqdist;
        } else {
            const std::vector<double>& dec = decoded[di];
            const std::vector<double>& qc = query_centered[qi];
            double acc = 0.0;
            for (std::uint32_t d = 0; d < data.dim; ++d) {
                const double diff = dec[d] - qc[d];
                acc += diff * diff;
            }
            est = acc;
        }
        const double rel = std::abs(est - true_sq) / true_sq;
        sum += rel;
        stats.max_rel_error = std::max(stats.max_rel_error, rel);
        ++stats.pairs;
    }
    stats.mean_rel_error = stats.pairs ? sum / static_cast<double>(stats.pairs) : 0.0;
    return stats;
}

struct CalibrationCell {
    std::uint32_t bits = 0;
    double quantile999 = 0.0;
    double bound = 0.0;  // 5.75 * 2^-B / sqrt(D)
    bool within_bound = false;
};

struct CalibrationReport {
    std::uint32_t dim = 0;
    std::uint64_t pairs = 0;
    std::vector<CalibrationCell> cells;
    double fitted_c_eps = 0.0;
};

inline constexpr double kEmpiricalFormulaConstant = 5.75;

/// Measures the 99.9% quantile of the inner-product estimation error between
/// random unit vectors, per bit width. Sampling happens directly in the
/// codebook frame (the estimator is rotation-invariant for isotropic pairs).
inline CalibrationReport calibrate(std::uint32_t dim, std::uint32_t bits_lo,
                                   std::uint32_t bits_hi, std::uint64_t n_pairs,
                                   std::uint64_t seed) {
    if (dim < 2) throw std::invalid_argument("calibrate: dim must be >= 2");
    if (bits_lo < 1 || bits_hi > 12 || bits_lo > bits_hi) {
        throw std::invalid_argument("calibrate: invalid bits range");
    }
    if (n_pairs < 10'000) {
        throw std::invalid_argument("calibrate: need at least 10^4 pairs");
    }

    CalibrationReport report;
    report.dim = dim;
    report.pairs = n_pairs;

    const std::size_t n_data = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(n_pairs))));
    const std::size_t n_query = (n_pairs + n_data - 1) / n_data;

    RandomSource rng(derive_stream_seed(seed, 0x63616Cull));
    auto sample_unit = [&](std::vector<double>& v) {
        double norm_sq = 0.0;
        for (auto& x : v) {
            x = rng.gaussian();
            norm_sq += x * x;
        }
        const double inv = 1.0 / std::sqrt(norm_sq);
        for (auto& x : v) x *= inv;
    };

    std::vector<std::vector<double>> data(n_data, std::vector<double>(dim));
    std::vector<std::vector<double>> qs(n_query, std::vector<double>(dim));
    for (auto& v : data) sample_unit(v);
    for (auto& v : qs) sample_unit(v);

    std::vector<double> errors(n_pairs);
    std::vector<double> signed_code(static_cast<std::size_t>(n_data) * dim);
    std::vector<double> inv_ip(n_data);

    for (std::uint32_t b = bits_lo; b <= bits_hi; ++b) {
        const double offset = (static_cast<double>(1u << b) - 1.0) / 2.0;
        detail::parallel_for(n_data, [&](std::size_t i) {
            const QuantizeResult qr = quantize(data[i], b);
            double* row = signed_code.data() + i * dim;
            for (std::uint32_t d = 0; d < dim; ++d) {
                row[d] = static_cast<double>(qr.code[d]) - offset;
            }
            inv_ip[i] = 1.0 / qr.ip_oy;
        });

        std::uint64_t pair = 0;
        for (std::size_t qi = 0; qi < n_query && pair < n_pairs; ++qi) {
            for (std::size_t di = 0; di < n_data && pair < n_pairs; ++di, ++pair) {
                const double* row = signed_code.data() + di * dim;
                const double* q = qs[qi].data();
                const double* o = data[di].data();
                double ip_code = 0.0, ip_true = 0.0;
                for (std::uint32_t d = 0; d < dim; ++d) {
                    ip_code += row[d] * q[d];
                    ip_true += o[d] * q[d];
                }
                errors[pair] = std::abs(ip_code * inv_ip[di] - ip_true);
            }
        }

        const std::size_t idx = static_cast<std::size_t>(
            std::ceil(0.999 * static_cast<double>(n_pairs))) - 1;
        std::nth_element(errors.begin(), errors.begin() + idx, errors.end());
        const double quantile = errors[idx];
        const double bound = kEmpiricalFormulaConstant *
                             std::pow(2.0, -static_cast<double>(b)) /
                             std::sqrt(static_cast<double>(dim));
        report.cells.push_back({b, quantile, bound, quantile < bound});
        report.fitted_c_eps = std::max(
            report.fitted_c_eps,
            quantile * std::pow(2.0, static_cast<double>(b)) * std::sqrt(static_cast<double>(dim)));
    }
    return report;
}

/// Gaussian-blob generator: cluster centers have coordinates ~ N(0, sep^2),
/// points add unit-variance noise. Data and query draws share the centers,
/// so a query set generated with a different stream is disjoint from the data
/// but follows the same mixture.
inline Dataset synth_blobs(std::size_t n, std::uint32_t dim, std::uint32_t clusters,
                           double separation, std::uint64_t seed,
                           std::uint64_t stream = 0) {
    if (n == 0 || dim == 0 || clusters == 0) {
        throw std::invalid_argument("synth_blobs: n, dim, clusters must be positive");
    }
    RandomSource center_rng(derive_stream_seed(seed, 0x73796E30ull));
    std::vector<double> centers(static_cast<std::size_t>(clusters) * dim);
    for (auto& c : centers) c = separation * center_rng.gaussian();

    RandomSource rng(derive_stream_seed(seed, 0x73796E31ull + stream));
    Dataset out;
    out.dim = dim;
    out.count = n;
    out.values.resize(n * static_cast<std::size_t>(dim));
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t c = rng.bounded(clusters);
        const double* center = centers.data() + c * dim;
        float* row = out.values.data() + i * dim;
        for (std::uint32_t d = 0; d < dim; ++d) {
            row[d] = static_cast<float>(center[d] + rng.gaussian());
        }
    }
    return out;
}

}  // namespace xrabitq
