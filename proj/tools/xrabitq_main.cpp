#include <cmath>
#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "xrabitq/eval.hpp"
#include "xrabitq/io.hpp"
#include "xrabitq/ivf.hpp"

namespace {

using json = nlohmann::json;

std::uint32_t auto_cluster_count(std::size_t n) {
    if (n >= 1'000'000) return 4096;
    const auto k = static_cast<std::uint32_t>(std::llround(std::sqrt(static_cast<double>(n))));
    return std::max<std::uint32_t>(1, k);
}

std::vector<std::uint32_t> parse_uint_list(const std::string& text) {
    std::vector<std::uint32_t> out;
    const auto range_pos = text.find("..");
    if (range_pos != std::string::npos) {
        const std::uint32_t lo = std::stoul(text.substr(0, range_pos));
        const std::uint32_t hi = std::stoul(text.substr(range_pos + 2));
        if (hi < lo) throw CLI::ValidationError("range upper bound below lower bound");
        for (std::uint32_t v = lo; v <= hi; ++v) out.push_back(v);
        return out;
    }
    std::size_t pos = 0;
    while (pos < text.size()) {
        const auto comma = text.find(',', pos);
        const std::string tok = text.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
        if (!tok.empty()) out.push_back(std::stoul(tok));
        if (comma == std::string::npos) break;
        pos = comma + 1;
    }
    if (out.empty()) throw CLI::ValidationError("empty list");
    return out;
}

int run_build(const std::string& data_path, std::uint32_t clusters, std::uint32_t bits,
              double eps0, std::uint64_t seed, std::uint32_t kmeans_iters,
              const std::string& out_path) {
    const xrabitq::Dataset data = xrabitq::read_fvecs(data_path);
    if (data.count == 0) throw xrabitq::format_error("dataset is empty: " + data_path);
    const std::uint32_t k = clusters == 0 ? auto_cluster_count(data.count) : clusters;

    xrabitq::QuantizationConfig config;
    config.bits_per_dim = bits;
    config.dim = xrabitq::padded_dim(data.dim);
    config.epsilon0 = eps0;

    std::cerr << "building: n=" << data.count << " dim=" << data.dim
              << " (padded " << config.dim << ") clusters=" << k << " bits=" << bits
              << "\n";
    const xrabitq::IvfIndex index =
        xrabitq::IvfIndex::build(data.values, data.count, data.dim, {}, k, config, seed,
                                 kmeans_iters);
    index.save(out_path);
    std::cerr << "saved " << out_path << "\n";
    return 0;
}

int run_search(const std::string& index_path, const std::string& queries_path,
               std::uint32_t k, std::uint32_t nprobe, std::optional<double> eps0,
               const std::string& out_path) {
    const xrabitq::IvfIndex index = xrabitq::IvfIndex::load(index_path);
    const xrabitq::Dataset queries = xrabitq::read_fvecs(queries_path);
    if (xrabitq::padded_dim(queries.dim) != index.config().dim) {
        throw xrabitq::format_error("query dimensionality does not match the index");
    }

    xrabitq::SearchParams params;
    params.k = k;
    params.nprobe = nprobe;
    params.epsilon0_override = eps0;

    xrabitq::IvecsData out;
    out.dim = k;
    out.count = queries.count;
    out.values.assign(static_cast<std::size_t>(k) * queries.count, -1);
    for (std::size_t qi = 0; qi < queries.count; ++qi) {
        const xrabitq::SearchResult r = index.search(queries.row(qi), params);
        for (std::size_t j = 0; j < r.ids.size() && j < k; ++j) {
            out.values[qi * k + j] = static_cast<std::int32_t>(r.ids[j]);
        }
    }
    xrabitq::write_ivecs(out_path, out);
    return 0;
}

int run_gt(const std::string& data_path, const std::string& queries_path,
           std::uint32_t k, const std::string& out_path) {
    const xrabitq::Dataset data = xrabitq::read_fvecs(data_path);
    const xrabitq::Dataset queries = xrabitq::read_fvecs(queries_path);
    const auto gt = xrabitq::ground_truth(data, queries, k);

    const std::uint32_t depth = static_cast<std::uint32_t>(std::min<std::size_t>(k, data.count));
    xrabitq::IvecsData out;
    out.dim = depth;
    out.count = queries.count;
    out.values.resize(static_cast<std::size_t>(depth) * queries.count);
    for (std::size_t qi = 0; qi < queries.count; ++qi) {
        for (std::uint32_t j = 0; j < depth; ++j) {
            out.values[qi * depth + j] = static_cast<std::int32_t>(gt[qi][j]);
        }
    }
    xrabitq::write_ivecs(out_path, out);
    return 0;
}

int run_eval(const std::string& index_path, const std::string& data_path,
             const std::string& queries_path, const std::string& gt_path,
             std::uint32_t k, const std::string& sweep_text, unsigned threads,
             const std::string& format) {
    const xrabitq::IvfIndex index = xrabitq::IvfIndex::load(index_path);
    const xrabitq::Dataset data = xrabitq::read_fvecs(data_path);
    const xrabitq::Dataset queries = xrabitq::read_fvecs(queries_path);
    const xrabitq::IvecsData gt_file = xrabitq::read_ivecs(gt_path);
    if (gt_file.count != queries.count) {
        throw xrabitq::format_error("ground truth count does not match query count");
    }
    std::vector<std::vector<std::uint64_t>> gt(gt_file.count);
    for (std::size_t qi = 0; qi < gt_file.count; ++qi) {
        gt[qi].assign(gt_file.row(qi).begin(), gt_file.row(qi).end());
    }

    const std::vector<std::uint32_t> sweep = parse_uint_list(sweep_text);
    json rows = json::array();
    if (format == "csv") {
        std::cout << "nprobe,recall,avg_distance_ratio,qps,stage1_evals,stage2_evals,pruned\n";
    }
    for (std::uint32_t nprobe : sweep) {
        xrabitq::SearchParams params;
        params.k = k;
        params.nprobe = nprobe;
        const xrabitq::EvalReport r =
            xrabitq::eval_search(index, data, queries, gt, params, threads);
        if (format == "csv") {
            std::cout << nprobe << "," << r.recall << "," << r.avg_distance_ratio << ","
                      << r.qps << "," << r.stage1_evals << "," << r.stage2_evals << ","
                      << r.pruned << "\n";
        } else {
            rows.push_back({{"nprobe", nprobe},
                            {"recall", r.recall},
                            {"avg_distance_ratio", r.avg_distance_ratio},
                            {"qps", r.qps},
                            {"stage1_evals", r.stage1_evals},
                            {"stage2_evals", r.stage2_evals},
                            {"pruned", r.pruned}});
        }
    }
    if (format == "json") std::cout << rows.dump(2) << "\n";
    return 0;
}

int run_eval_error(const std::string& data_path, const std::string& queries_path,
                   const std::string& method_name, std::uint32_t bits,
                   std::uint64_t seed, std::uint64_t max_pairs,
                   const std::string& format) {
    const xrabitq::Dataset data = xrabitq::read_fvecs(data_path);
    const xrabitq::Dataset queries = xrabitq::read_fvecs(queries_path);
    const xrabitq::ErrorMethod method = xrabitq::parse_error_method(method_name);
    const xrabitq::ErrorStats stats =
        xrabitq::eval_error(data, queries, method, bits, seed, max_pairs);
    if (format == "csv") {
        std::cout << "method,bits,pairs,mean_rel_error,max_rel_error\n"
                  << method_name << "," << bits << "," << stats.pairs << ","
                  << stats.mean_rel_error << "," << stats.max_rel_error << "\n";
    } else {
        std::cout << json{{"method", method_name},
                          {"bits", bits},
                          {"pairs", stats.pairs},
                          {"mean_rel_error", stats.mean_rel_error},
                          {"max_rel_error", stats.max_rel_error}}
                         .dump(2)
                  << "\n";
    }
    return 0;
}

int run_calibrate(std::uint32_t dim, const std::string& bits_text, std::uint64_t pairs,
                  std::uint64_t seed, const std::string& format) {
    const std::vector<std::uint32_t> bits = parse_uint_list(bits_text);
    const std::uint32_t lo = *std::min_element(bits.begin(), bits.end());
    const std::uint32_t hi = *std::max_element(bits.begin(), bits.end());
    const xrabitq::CalibrationReport report = xrabitq::calibrate(dim, lo, hi, pairs, seed);
    if (format == "csv") {
        std::cout << "dim,bits,quantile999,bound,within_bound\n";
        for (const auto& cell : report.cells) {
            std::cout << dim << "," << cell.bits << "," << cell.quantile999 << ","
                      << cell.bound << "," << (cell.within_bound ? 1 : 0) << "\n";
        }
        std::cout << "# fitted_c_eps," << report.fitted_c_eps << "\n";
    } else {
        json cells = json::array();
        for (const auto& cell : report.cells) {
            cells.push_back({{"bits", cell.bits},
                             {"quantile999", cell.quantile999},
                             {"bound", cell.bound},
                             {"within_bound", cell.within_bound}});
        }
        std::cout << json{{"dim", dim},
                          {"pairs", pairs},
                          {"cells", cells},
                          {"fitted_c_eps", report.fitted_c_eps}}
                         .dump(2)
                  << "\n";
    }
    return 0;
}

int run_synth(std::size_t n, std::uint32_t dim, std::uint32_t clusters, double sep,
              std::uint64_t seed, const std::string& out_path,
              const std::string& queries_out, std::size_t n_queries) {
    const xrabitq::Dataset data = xrabitq::synth_blobs(n, dim, clusters, sep, seed, 0);
    xrabitq::write_fvecs(out_path, data);
    if (!queries_out.empty()) {
        const xrabitq::Dataset queries =
            xrabitq::synth_blobs(n_queries, dim, clusters, sep, seed, 1);
        xrabitq::write_fvecs(queries_out, queries);
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Extended-RaBitQ vector quantization and IVF search"};
    app.require_subcommand(1);

    std::string data_path, queries_path, gt_path, index_path, out_path, method_name;
    std::string sweep_text, bits_text = "1..8", format = "csv", queries_out;
    std::uint32_t clusters = 0, bits = 5, k = 10, nprobe = 1, dim = 128, kmeans_iters = 25;
    std::uint64_t seed = 42, pairs = 100000, max_pairs = 10'000'000;
    std::size_t n = 10000, n_queries = 1000;
    double eps0 = 1.9, sep = 1.0;
    std::optional<double> eps0_override;
    unsigned threads = 1;

    auto* build = app.add_subcommand("build", "Build an index from an fvecs file");
    build->add_option("--data", data_path)->required();
    build->add_option("--clusters", clusters, "0 = auto (sqrt(N), 4096 at million scale)");
    build->add_option("--bits", bits)->check(CLI::Range(1, 12));
    build->add_option("--eps0", eps0)->check(CLI::PositiveNumber);
    build->add_option("--seed", seed);
    build->add_option("--kmeans-iters", kmeans_iters);
    build->add_option("--out", out_path)->required();

    auto* search = app.add_subcommand("search", "Query an index, write ids as ivecs");
    search->add_option("--index", index_path)->required();
    search->add_option("--queries", queries_path)->required();
    search->add_option("--k", k)->check(CLI::PositiveNumber);
    search->add_option("--nprobe", nprobe)->check(CLI::PositiveNumber);
    double eps0_value = 0.0;
    auto* eps0_opt = search->add_option("--eps0", eps0_value, "override pruning epsilon0");
    search->add_option("--out", out_path)->required();

    auto* gt = app.add_subcommand("gt", "Exact brute-force ground truth");
    gt->add_option("--data", data_path)->required();
    gt->add_option("--queries", queries_path)->required();
    gt->add_option("--k", k)->check(CLI::PositiveNumber);
    gt->add_option("--out", out_path)->required();

    auto* eval = app.add_subcommand("eval", "Recall / distance-ratio / QPS sweep");
    eval->add_option("--index", index_path)->required();
    eval->add_option("--data", data_path)->required();
    eval->add_option("--queries", queries_path)->required();
    eval->add_option("--gt", gt_path)->required();
    eval->add_option("--k", k)->check(CLI::PositiveNumber);
    eval->add_option("--nprobe-sweep", sweep_text)->required();
    eval->add_option("--threads", threads, "parallel queries (disables QPS figure)");
    eval->add_option("--format", format)->check(CLI::IsMember({"csv", "json"}));

    auto* eval_error = app.add_subcommand("eval-error", "Distance-estimation error");
    eval_error->add_option("--data", data_path)->required();
    eval_error->add_option("--queries", queries_path)->required();
    eval_error->add_option("--method", method_name)
        ->required()
        ->check(CLI::IsMember({"xrabitq", "xrabitq-padded-reference", "sq", "lvq"}));
    eval_error->add_option("--bits", bits)->check(CLI::Range(1, 12));
    eval_error->add_option("--seed", seed);
    eval_error->add_option("--max-pairs", max_pairs);
    eval_error->add_option("--format", format)->check(CLI::IsMember({"csv", "json"}));

    auto* calibrate = app.add_subcommand("calibrate", "Empirical error-formula quantiles");
    calibrate->add_option("--dim", dim)->check(CLI::PositiveNumber);
    calibrate->add_option("--bits", bits_text, "range a..b or list a,b,c");
    calibrate->add_option("--pairs", pairs);
    calibrate->add_option("--seed", seed);
    calibrate->add_option("--format", format)->check(CLI::IsMember({"csv", "json"}));

    auto* synth = app.add_subcommand("synth", "Generate Gaussian-blob fvecs data");
    synth->add_option("--n", n);
    synth->add_option("--dim", dim)->check(CLI::PositiveNumber);
    synth->add_option("--clusters", clusters, "number of blobs")->check(CLI::PositiveNumber);
    synth->add_option("--sep", sep, "center spread relative to unit blob noise");
    synth->add_option("--seed", seed);
    synth->add_option("--out", out_path)->required();
    synth->add_option("--queries-out", queries_out, "also emit a disjoint query set");
    synth->add_option("--n-queries", n_queries);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        if (build->parsed()) {
            return run_build(data_path, clusters, bits, eps0, seed, kmeans_iters, out_path);
        }
        if (search->parsed()) {
            if (eps0_opt->count() > 0) eps0_override = eps0_value;
            return run_search(index_path, queries_path, k, nprobe, eps0_override, out_path);
        }
        if (gt->parsed()) return run_gt(data_path, queries_path, k, out_path);
        if (eval->parsed()) {
            return run_eval(index_path, data_path, queries_path, gt_path, k, sweep_text,
                            threads, format);
        }
        if (eval_error->parsed()) {
            return run_eval_error(data_path, queries_path, method_name, bits, seed,
                                  max_pairs, format);
        }
        if (calibrate->parsed()) return run_calibrate(dim, bits_text, pairs, seed, format);
        if (synth->parsed()) {
            const std::uint32_t c = clusters == 0 ? 1 : clusters;
            return run_synth(n, dim, c, sep, seed, out_path, queries_out, n_queries);
        }
        return 1;
    } catch (const xrabitq::io_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::logic_error& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 3;
    }
}
