#pragma once

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <optional>
#include <queue>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "xrabitq/common.hpp"
#include "xrabitq/crc64.hpp"
#include "xrabitq/estimator.hpp"
#include "xrabitq/quantizer.hpp"
#include "xrabitq/rng.hpp"
#include "xrabitq/rotator.hpp"

namespace xrabitq {

namespace detail {

/// Squared L2 distance with eight independent accumulator chains so the loop
/// is not latency-bound without reassociation.
inline double l2_sq(const float* a, const float* b, std::uint32_t dim) {
    double acc0 = 0, acc1 = 0, acc2 = 0, acc3 = 0;
    double acc4 = 0, acc5 = 0, acc6 = 0, acc7 = 0;
    std::uint32_t i = 0;
    for (; i + 8 <= dim; i += 8) {
        const double d0 = static_cast<double>(a[i + 0]) - b[i + 0];
        const double d1 = static_cast<double>(a[i + 1]) - b[i + 1];
        const double d2 = static_cast<double>(a[i + 2]) - b[i + 2];
        const double d3 = static_cast<double>(a[i + 3]) - b[i + 3];
        const double d4 = static_cast<double>(a[i + 4]) - b[i + 4];
        const double d5 = static_cast<double>(a[i + 5]) - b[i + 5];
        const double d6 = static_cast<double>(a[i + 6]) - b[i + 6];
        const double d7 = static_cast<double>(a[i + 7]) - b[i + 7];
        acc0 += d0 * d0;
        acc1 += d1 * d1;
        acc2 += d2 * d2;
        acc3 += d3 * d3;
        acc4 += d4 * d4;
        acc5 += d5 * d5;
        acc6 += d6 * d6;
        acc7 += d7 * d7;
    }
    for (; i < dim; ++i) {
        const double d = static_cast<double>(a[i]) - b[i];
        acc0 += d * d;
    }
    return ((acc0 + acc1) + (acc2 + acc3)) + ((acc4 + acc5) + (acc6 + acc7));
}

/// Runs fn(i) for i in [0, n) across a small worker pool. Each index is
/// processed exactly once; output ordering is the caller's responsibility
/// (workers should write only to their own slots).
template <typename Fn>
void parallel_for(std::size_t n, const Fn& fn) {
    const std::size_t workers =
        std::min<std::size_t>(n, std::max(1u, std::thread::hardware_concurrency()));
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (;;) {
                const std::size_t i = next.fetch_add(1);
                if (i >= n) return;
                fn(i);
            }
        });
    }
    for (auto& t : pool) t.join();
}

}  // namespace detail

struct KmeansResult {
    std::uint32_t k = 0;
    std::uint32_t dim = 0;
    std::vector<float> centroids;           // k * dim
    std::vector<std::uint32_t> assignments;  // one per point
    std::vector<double> objective_history;   // per-iteration sum of squared distances
    std::uint32_t iterations = 0;
};

/// Lloyd's algorithm with k-means++ seeding. Stops at max_iters or when no
/// assignment changes; empty clusters are repaired by stealing the farthest
/// point of the largest cluster.
inline KmeansResult kmeans(std::span<const float> data, std::size_t n,
                           std::uint32_t dim, std::uint32_t k_clusters,
                           std::uint32_t max_iters, std::uint64_t seed) {
    if (n == 0 || dim == 0) throw std::invalid_argument("kmeans: empty data");
    if (data.size() != n * static_cast<std::size_t>(dim)) {
        throw std::invalid_argument("kmeans: data size does not match n * dim");
    }
    if (k_clusters == 0 || k_clusters > n) {
        throw std::invalid_argument("kmeans: need 1 <= k_clusters <= n");
    }

    KmeansResult result;
    result.k = k_clusters;
    result.dim = dim;
    result.centroids.resize(static_cast<std::size_t>(k_clusters) * dim);
    result.assignments.assign(n, 0);

    RandomSource rng(derive_stream_seed(seed, 0x6B6D6561ull));  // kmeans stream
    auto point = [&](std::size_t i) { return data.data() + i * dim; };
    auto centroid = [&](std::size_t c) {
        return result.centroids.data() + c * dim;
    };

    // k-means++ seeding.
    std::vector<double> min_dist(n);
    std::vector<char> chosen(n, 0);
    {
        const std::size_t first = rng.bounded(n);
        std::memcpy(centroid(0), point(first), dim * sizeof(float));
        chosen[first] = 1;
        for (std::size_t i = 0; i < n; ++i) {
            min_dist[i] = detail::l2_sq(point(i), centroid(0), dim);
        }
        for (std::uint32_t c = 1; c < k_clusters; ++c) {
            double total = 0.0;
            for (std::size_t i = 0; i < n; ++i) total += min_dist[i];
            std::size_t pick = n;
            if (total > 0.0) {
                const double r = rng.uniform01() * total;
                double run = 0.0;
                for (std::size_t i = 0; i < n; ++i) {
                    run += min_dist[i];
                    if (run >= r) {
                        pick = i;
                        break;
                    }
                }
                if (pick == n) pick = n - 1;
            } else {
                // All remaining mass is zero (duplicate-heavy data): take the
                // first unchosen point.
                for (std::size_t i = 0; i < n; ++i) {
                    if (!chosen[i]) {
                        pick = i;
                        break;
                    }
                }
                if (pick == n) pick = 0;
            }
            chosen[pick] = 1;
            std::memcpy(centroid(c), point(pick), dim * sizeof(float));
            for (std::size_t i = 0; i < n; ++i) {
                min_dist[i] = std::min(min_dist[i], detail::l2_sq(point(i), centroid(c), dim));
            }
        }
    }

    std::vector<double> sums(static_cast<std::size_t>(k_clusters) * dim);
    std::vector<std::size_t> counts(k_clusters);

    for (std::uint32_t iter = 0; iter < max_iters; ++iter) {
        // Assignment.
        std::size_t changed = 0;
        double objective = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const float* p = point(i);
            double best = detail::l2_sq(p, centroid(0), dim);
            std::uint32_t best_c = 0;
            for (std::uint32_t c = 1; c < k_clusters; ++c) {
                const double d = detail::l2_sq(p, centroid(c), dim);
                if (d < best) {
                    best = d;
                    best_c = c;
                }
            }
            if (result.assignments[i] != best_c) {
                result.assignments[i] = best_c;
                ++changed;
            }
            objective += best;
        }
        result.objective_history.push_back(objective);
        result.iterations = iter + 1;
        if (changed == 0 && iter > 0) break;

        // Update.
        std::fill(sums.begin(), sums.end(), 0.0);
        std::fill(counts.begin(), counts.end(), 0);
        for (std::size_t i = 0; i < n; ++i) {
            const std::uint32_t c = result.assignments[i];
            const float* p = point(i);
            double* s = sums.data() + static_cast<std::size_t>(c) * dim;
            for (std::uint32_t d = 0; d < dim; ++d) s[d] += p[d];
            ++counts[c];
        }
        for (std::uint32_t c = 0; c < k_clusters; ++c) {
            if (counts[c] == 0) continue;
            const double inv = 1.0 / static_cast<double>(counts[c]);
            const double* s = sums.data() + static_cast<std::size_t>(c) * dim;
            float* cent = centroid(c);
            for (std::uint32_t d = 0; d < dim; ++d) {
                cent[d] = static_cast<float>(s[d] * inv);
            }
        }

        // Empty-cluster repair: move the farthest member of the largest
        // cluster into each empty one. Only the empty cluster's centroid is
        // rewritten, so the objective stays non-increasing.
        for (std::uint32_t c = 0; c < k_clusters; ++c) {
            if (counts[c] != 0) continue;
            std::uint32_t largest = 0;
            for (std::uint32_t c2 = 1; c2 < k_clusters; ++c2) {
                if (counts[c2] > counts[largest]) largest = c2;
            }
            if (counts[largest] <= 1) continue;
            double far_d = -1.0;
            std::size_t far_i = 0;
            for (std::size_t i = 0; i < n; ++i) {
                if (result.assignments[i] != largest) continue;
                const double d = detail::l2_sq(point(i), centroid(largest), dim);
                if (d > far_d) {
                    far_d = d;
                    far_i = i;
                }
            }
            std::memcpy(centroid(c), point(far_i), dim * sizeof(float));
            result.assignments[far_i] = c;
            --counts[largest];
            ++counts[c];
        }
    }
    return result;
}

struct SearchParams {
    std::uint32_t k = 10;
    std::uint32_t nprobe = 1;
    std::optional<double> epsilon0_override;
};

struct SearchStats {
    std::uint64_t stage1_evals = 0;
    std::uint64_t stage2_evals = 0;
    std::uint64_t pruned = 0;
    bool nprobe_clamped = false;
};

struct SearchResult {
    std::vector<std::uint64_t> ids;
    std::vector<double> est_sqdists;  // ascending
    SearchStats stats;
};

/// Inverted-file index over extended-RaBitQ codes. Immutable once built or
/// loaded; any number of threads may search it concurrently.
class IvfIndex {
   public:
    struct Cluster {
        std::vector<std::uint64_t> ids;
        std::vector<std::uint8_t> msb_blocks;   // ceil(count/32)*32 planes, code-major
        std::vector<std::uint8_t> rest_planes;  // count * dim*(bits-1)/8
        std::vector<float> dist_to_centroid;
        std::vector<float> f_rescale;
        std::vector<float> f_rescale_1bit;
        std::vector<float> f_error;
        std::vector<std::uint8_t> degenerate;  // bitmap, ceil(count/8)

        bool operator==(const Cluster&) const = default;
    };

    static IvfIndex build(std::span<const float> data, std::size_t count,
                          std::uint32_t raw_dim, std::span<const std::uint64_t> ids,
                          std::uint32_t k_clusters, const QuantizationConfig& config,
                          std::uint64_t seed, std::uint32_t kmeans_max_iters = 25) {
        config.validate();
        if (count == 0) throw std::invalid_argument("build: data must be non-empty");
        if (data.size() != count * static_cast<std::size_t>(raw_dim)) {
            throw std::invalid_argument("build: data size does not match count * raw_dim");
        }
        if (padded_dim(raw_dim) != config.dim) {
            throw std::invalid_argument("build: config.dim must be the padded raw dim");
        }
        if (!ids.empty() && ids.size() != count) {
            throw std::invalid_argument("build: ids size does not match count");
        }
        if (k_clusters == 0 || k_clusters > count) {
            throw std::invalid_argument("build: need 1 <= k_clusters <= count");
        }

        IvfIndex index;
        index.config_ = config;
        index.count_ = count;

        const std::uint32_t dim = config.dim;
        std::vector<float> padded;
        const float* rows = data.data();
        if (raw_dim != dim) {
            padded.assign(count * static_cast<std::size_t>(dim), 0.0f);
            for (std::size_t i = 0; i < count; ++i) {
                std::memcpy(padded.data() + i * dim, data.data() + i * raw_dim,
                            raw_dim * sizeof(float));
            }
            rows = padded.data();
        }

        KmeansResult km = kmeans({rows, count * static_cast<std::size_t>(dim)}, count,
                                 dim, k_clusters, kmeans_max_iters,
                                 derive_stream_seed(seed, 1));
        index.centroids_ = std::move(km.centroids);
        index.rotator_ = RandomRotator::sample(dim, derive_stream_seed(seed, 2));

        index.clusters_.resize(k_clusters);
        std::vector<std::vector<std::size_t>> members(k_clusters);
        for (std::size_t i = 0; i < count; ++i) {
            members[km.assignments[i]].push_back(i);
        }

        const std::size_t plane_bytes = dim / 8;
        const std::size_t rest_bytes =
            static_cast<std::size_t>(dim) * (config.bits_per_dim - 1) / 8;

        detail::parallel_for(k_clusters, [&](std::size_t c) {
            Cluster& cl = index.clusters_[c];
            const auto& m = members[c];
            const std::size_t cnt = m.size();
            const std::size_t blocks = (cnt + 31) / 32;
            cl.ids.resize(cnt);
            cl.msb_blocks.assign(blocks * 32 * plane_bytes, 0);
            cl.rest_planes.assign(cnt * rest_bytes, 0);
            cl.dist_to_centroid.resize(cnt);
            cl.f_rescale.resize(cnt);
            cl.f_rescale_1bit.resize(cnt);
            cl.f_error.resize(cnt);
            cl.degenerate.assign((cnt + 7) / 8, 0);

            const float* cent = index.centroids_.data() + c * dim;
            for (std::size_t j = 0; j < cnt; ++j) {
                const std::size_t i = m[j];
                cl.ids[j] = ids.empty() ? static_cast<std::uint64_t>(i) : ids[i];
                const QuantizedVector qv = encode_vector(
                    {rows + i * dim, dim}, {cent, dim}, index.rotator_, config);
                std::memcpy(cl.msb_blocks.data() + j * plane_bytes,
                            qv.code.msb_plane.data(), plane_bytes);
                if (rest_bytes > 0) {
                    std::memcpy(cl.rest_planes.data() + j * rest_bytes,
                                qv.code.rest_planes.data(), rest_bytes);
                }
                cl.dist_to_centroid[j] = static_cast<float>(qv.dist_to_centroid);
                cl.f_rescale[j] = static_cast<float>(qv.f_rescale);
                cl.f_rescale_1bit[j] = static_cast<float>(qv.f_rescale_1bit);
                cl.f_error[j] = static_cast<float>(qv.f_error);
                if (qv.degenerate) cl.degenerate[j >> 3] |= static_cast<std::uint8_t>(1u << (j & 7));
            }
        });
        return index;
    }

    SearchResult search(std::span<const float> q_r, const SearchParams& params,
                        Stage1Mode mode = Stage1Mode::exact) const {
        if (params.k == 0) throw std::invalid_argument("search: k must be >= 1");
        if (params.nprobe == 0) throw std::invalid_argument("search: nprobe must be >= 1");
        const std::uint32_t dim = config_.dim;
        if (q_r.size() > dim) {
            throw std::invalid_argument("search: query has more dimensions than the index");
        }
        std::vector<float> q(dim, 0.0f);
        std::memcpy(q.data(), q_r.data(), q_r.size() * sizeof(float));

        SearchResult result;
        const std::uint32_t n_clusters = static_cast<std::uint32_t>(clusters_.size());
        std::uint32_t nprobe = params.nprobe;
        if (nprobe > n_clusters) {
            nprobe = n_clusters;
            result.stats.nprobe_clamped = true;
        }
        const std::size_t k_eff = std::min<std::size_t>(params.k, count_);

        std::vector<std::pair<double, std::uint32_t>> order(n_clusters);
        for (std::uint32_t c = 0; c < n_clusters; ++c) {
            order[c] = {detail::l2_sq(q.data(), centroids_.data() + static_cast<std::size_t>(c) * dim, dim), c};
        }
        std::partial_sort(order.begin(), order.begin() + nprobe, order.end());

        struct HeapEntry {
            double est;
            std::uint64_t id;
        };
        struct WorseOrder {
            bool operator()(const HeapEntry& a, const HeapEntry& b) const {
                return a.est < b.est || (a.est == b.est && a.id < b.id);
            }
        };
        std::priority_queue<HeapEntry, std::vector<HeapEntry>, WorseOrder> heap;

        const std::size_t plane_bytes = dim / 8;
        const std::size_t rest_bytes =
            static_cast<std::size_t>(dim) * (config_.bits_per_dim - 1) / 8;
        std::array<double, 32> block_ips;

        for (std::uint32_t p = 0; p < nprobe; ++p) {
            const std::uint32_t c = order[p].second;
            const Cluster& cl = clusters_[c];
            const std::size_t cnt = cl.ids.size();
            if (cnt == 0) continue;

            QueryContext qc = preprocess_query(
                q, {centroids_.data() + static_cast<std::size_t>(c) * dim, dim},
                rotator_, config_);
            if (params.epsilon0_override) qc.epsilon0 = *params.epsilon0_override;
            if (mode == Stage1Mode::table) build_stage1_lut(qc);
            const double ip_dev =
                mode == Stage1Mode::table ? qc.lut->deviation_bound : 0.0;

            const std::size_t blocks = (cnt + 31) / 32;
            for (std::size_t b = 0; b < blocks; ++b) {
                const std::size_t base = b * 32;
                const std::uint32_t valid =
                    static_cast<std::uint32_t>(std::min<std::size_t>(32, cnt - base));
                MsbBlockView view{cl.msb_blocks.data() + base * plane_bytes, valid};
                batch_stage1(view, qc, mode, block_ips);

                for (std::uint32_t s = 0; s < valid; ++s) {
                    const std::size_t j = base + s;
                    detail::FactorView f{
                        cl.dist_to_centroid[j], cl.f_rescale[j], cl.f_rescale_1bit[j],
                        cl.f_error[j],
                        static_cast<bool>((cl.degenerate[j >> 3] >> (j & 7)) & 1u)};
                    ++result.stats.stage1_evals;
                    const EstimateWithBound e1 =
                        detail::stage1_from_ip(f, qc, block_ips[s], ip_dev);

                    const bool heap_full = heap.size() == k_eff;
                    if (heap_full && e1.lower_bound > heap.top().est) {
                        ++result.stats.pruned;
                        continue;
                    }

                    double est = e1.est_sqdist;
                    if (config_.bits_per_dim > 1 && !f.degenerate) {
                        const double ip1 =
                            mode == Stage1Mode::exact
                                ? block_ips[s]
                                : stage1_ip({cl.msb_blocks.data() + j * plane_bytes,
                                             plane_bytes},
                                            qc);
                        est = detail::stage2_from_ip(
                                  f, {cl.rest_planes.data() + j * rest_bytes, rest_bytes},
                                  config_.bits_per_dim, qc, ip1)
                                  .est_sqdist;
                        ++result.stats.stage2_evals;
                    }

                    const HeapEntry entry{est, cl.ids[j]};
                    if (!heap_full) {
                        heap.push(entry);
                    } else {
                        const HeapEntry& top = heap.top();
                        if (entry.est < top.est ||
                            (entry.est == top.est && entry.id < top.id)) {
                            heap.pop();
                            heap.push(entry);
                        }
                    }
                }
            }
        }

        std::vector<HeapEntry> sorted;
        sorted.reserve(heap.size());
        while (!heap.empty()) {
            sorted.push_back(heap.top());
            heap.pop();
        }
        std::sort(sorted.begin(), sorted.end(), [](const HeapEntry& a, const HeapEntry& b) {
            return a.est < b.est || (a.est == b.est && a.id < b.id);
        });
        result.ids.reserve(sorted.size());
        result.est_sqdists.reserve(sorted.size());
        for (const auto& e : sorted) {
            result.ids.push_back(e.id);
            result.est_sqdists.push_back(e.est);
        }
        return result;
    }

    void save(const std::string& path) const {
        std::ostringstream os(std::ios::binary);
        os.write(kIndexMagic, 4);
        write_pod(os, kIndexFormatVersion);
        write_pod(os, static_cast<std::uint8_t>(config_.bits_per_dim));
        write_pod(os, config_.dim);
        write_pod(os, config_.epsilon0);
        write_pod(os, static_cast<std::uint32_t>(clusters_.size()));
        write_pod(os, static_cast<std::uint64_t>(count_));
        rotator_.write_to(os);
        os.write(reinterpret_cast<const char*>(centroids_.data()),
                 static_cast<std::streamsize>(centroids_.size() * sizeof(float)));
        for (const Cluster& cl : clusters_) {
            write_pod(os, static_cast<std::uint64_t>(cl.ids.size()));
            write_bytes(os, cl.ids.data(), cl.ids.size() * sizeof(std::uint64_t));
            write_bytes(os, cl.msb_blocks.data(), cl.msb_blocks.size());
            write_bytes(os, cl.rest_planes.data(), cl.rest_planes.size());
            write_bytes(os, cl.dist_to_centroid.data(), cl.dist_to_centroid.size() * sizeof(float));
            write_bytes(os, cl.f_rescale.data(), cl.f_rescale.size() * sizeof(float));
            write_bytes(os, cl.f_rescale_1bit.data(), cl.f_rescale_1bit.size() * sizeof(float));
            write_bytes(os, cl.f_error.data(), cl.f_error.size() * sizeof(float));
            write_bytes(os, cl.degenerate.data(), cl.degenerate.size());
        }
        const std::string payload = os.str();
        const std::uint64_t checksum = crc64(payload.data(), payload.size());

        std::ofstream file(path, std::ios::binary | std::ios::trunc);
        if (!file) throw io_error("cannot open " + path + " for writing");
        file.write(payload.data(), static_cast<std::streamsize>(payload.size()));
        file.write(reinterpret_cast<const char*>(&checksum), sizeof(checksum));
        if (!file) throw io_error("write failed for " + path);
    }

    static IvfIndex load(const std::string& path) {
        std::ifstream file(path, std::ios::binary);
        if (!file) throw io_error("cannot open " + path);
        std::ostringstream raw;
        raw << file.rdbuf();
        const std::string buf = raw.str();

        if (buf.size() < 16) {
            throw checksum_error("index file too short: " + path);
        }
        if (std::memcmp(buf.data(), kIndexMagic, 4) != 0) {
            throw format_error("bad magic in " + path + ": not an index file");
        }
        std::uint32_t version;
        std::memcpy(&version, buf.data() + 4, 4);
        if (version != kIndexFormatVersion) {
            throw version_error(version, kIndexFormatVersion);
        }
        std::uint64_t stored_crc;
        std::memcpy(&stored_crc, buf.data() + buf.size() - 8, 8);
        if (crc64(buf.data(), buf.size() - 8) != stored_crc) {
            throw checksum_error("checksum mismatch in " + path);
        }

        std::istringstream is(buf.substr(0, buf.size() - 8), std::ios::binary);
        is.seekg(8);  // past magic + version
        IvfIndex index;
        const std::uint8_t bits = read_pod<std::uint8_t>(is, path);
        index.config_.bits_per_dim = bits;
        index.config_.dim = read_pod<std::uint32_t>(is, path);
        index.config_.epsilon0 = read_pod<double>(is, path);
        const std::uint32_t n_clusters = read_pod<std::uint32_t>(is, path);
        index.count_ = read_pod<std::uint64_t>(is, path);
        index.config_.validate();

        index.rotator_ = RandomRotator::read_from(is);
        if (index.rotator_.dim() != index.config_.dim) {
            throw format_error("rotator dim mismatch in " + path);
        }
        index.centroids_.resize(static_cast<std::size_t>(n_clusters) * index.config_.dim);
        read_bytes(is, index.centroids_.data(), index.centroids_.size() * sizeof(float), path);

        const std::uint32_t dim = index.config_.dim;
        const std::size_t plane_bytes = dim / 8;
        const std::size_t rest_bytes = static_cast<std::size_t>(dim) * (bits - 1) / 8;
        index.clusters_.resize(n_clusters);
        for (Cluster& cl : index.clusters_) {
            const std::uint64_t cnt = read_pod<std::uint64_t>(is, path);
            const std::size_t blocks = (cnt + 31) / 32;
            cl.ids.resize(cnt);
            read_bytes(is, cl.ids.data(), cnt * sizeof(std::uint64_t), path);
            cl.msb_blocks.resize(blocks * 32 * plane_bytes);
            read_bytes(is, cl.msb_blocks.data(), cl.msb_blocks.size(), path);
            cl.rest_planes.resize(cnt * rest_bytes);
            read_bytes(is, cl.rest_planes.data(), cl.rest_planes.size(), path);
            cl.dist_to_centroid.resize(cnt);
            read_bytes(is, cl.dist_to_centroid.data(), cnt * sizeof(float), path);
            cl.f_rescale.resize(cnt);
            read_bytes(is, cl.f_rescale.data(), cnt * sizeof(float), path);
            cl.f_rescale_1bit.resize(cnt);
            read_bytes(is, cl.f_rescale_1bit.data(), cnt * sizeof(float), path);
            cl.f_error.resize(cnt);
            read_bytes(is, cl.f_error.data(), cnt * sizeof(float), path);
            cl.degenerate.resize((cnt + 7) / 8);
            read_bytes(is, cl.degenerate.data(), cl.degenerate.size(), path);
        }
        return index;
    }

    const QuantizationConfig& config() const { return config_; }
    const RandomRotator& rotator() const { return rotator_; }
    std::size_t num_vectors() const { return count_; }
    std::uint32_t num_clusters() const { return static_cast<std::uint32_t>(clusters_.size()); }
    const Cluster& cluster(std::uint32_t c) const { return clusters_[c]; }
    std::span<const float> centroid_row(std::uint32_t c) const {
        return {centroids_.data() + static_cast<std::size_t>(c) * config_.dim, config_.dim};
    }

    bool operator==(const IvfIndex& other) const {
        return config_.bits_per_dim == other.config_.bits_per_dim &&
               config_.dim == other.config_.dim &&
               config_.epsilon0 == other.config_.epsilon0 && count_ == other.count_ &&
               rotator_ == other.rotator_ && centroids_ == other.centroids_ &&
               clusters_ == other.clusters_;
    }

   private:
    template <typename T>
    static void write_pod(std::ostream& os, const T& v) {
        os.write(reinterpret_cast<const char*>(&v), sizeof(T));
    }
    static void write_bytes(std::ostream& os, const void* p, std::size_t n) {
        if (n > 0) os.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
    }
    template <typename T>
    static T read_pod(std::istream& is, const std::string& path) {
        T v;
        is.read(reinterpret_cast<char*>(&v), sizeof(T));
        if (!is) throw format_error("unexpected end of index data in " + path);
        return v;
    }
    static void read_bytes(std::istream& is, void* p, std::size_t n, const std::string& path) {
        if (n == 0) return;
        is.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
        if (!is) throw format_error("unexpected end of index data in " + path);
    }

    QuantizationConfig config_;
    std::size_t count_ = 0;
    RandomRotator rotator_;
    std::vector<float> centroids_;
    std::vector<Cluster> clusters_;
};

}  // namespace xrabitq
