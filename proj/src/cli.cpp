#include "swg/cli.hpp"

#include "swg/dataset.hpp"
#include "swg/error.hpp"
#include "swg/experiment.hpp"
#include "swg/guidance.hpp"
#include "swg/infotheory.hpp"
#include "swg/io.hpp"
#include "swg/train.hpp"
#include "swg/weights_io.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>

namespace swg::cli {

namespace fs = std::filesystem;

namespace {

// A flag value that parsed but makes no sense.
class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

template <typename F>
auto flag(const std::string & name, F && f) {
    try {
        return f();
    } catch (const InvalidArgument & e) {
        throw UsageError(name + ": " + e.what());
    }
}

std::pair<double, double> parse_band(const std::string & text) {
    const auto parts = io::split(text, ':');
    if (parts.size() != 2) throw InvalidArgument("retention band '" + text + "' must look like lo:hi");
    const double lo = io::parse_double(parts[0], "band lo");
    const double hi = io::parse_double(parts[1], "band hi");
    if (!(lo >= 0.0 && hi <= 1.0 && lo <= hi)) throw InvalidArgument("band '" + text + "' needs 0 <= lo <= hi <= 1");
    return {lo, hi};
}

std::string band_string(std::pair<double, double> b) {
    return io::format_double(b.first) + ":" + io::format_double(b.second);
}

experiment::Conditioning parse_condition(const std::string & text, int class_count) {
    experiment::Conditioning c;
    if (text == "null" || text == "none") return c;
    if (text == "cycle") {
        c.kind = experiment::Conditioning::Kind::Cycle;
        return c;
    }
    c.kind = experiment::Conditioning::Kind::Fixed;
    c.fixed_class = int(io::parse_int(text, "class"));
    if (c.fixed_class < 0 || c.fixed_class >= class_count)
        throw InvalidArgument("class " + text + " outside [0, " + std::to_string(class_count) + ")");
    return c;
}

std::vector<double> parse_doubles(const std::string & text, const std::string & what) {
    std::vector<double> out;
    for (const auto & s : io::split(text, ',')) out.push_back(io::parse_double(s, what));
    if (out.empty()) throw InvalidArgument("empty list");
    return out;
}

std::vector<std::optional<double>> parse_optional_doubles(const std::string & text, const std::string & what) {
    std::vector<std::optional<double>> out;
    for (const auto & s : io::split(text, ',')) {
        if (io::trim(s) == "none") out.push_back(std::nullopt);
        else out.push_back(io::parse_double(s, what));
    }
    return out;
}

void write_csv_vectors(const fs::path & path, const std::vector<std::vector<double>> & rows) {
    std::string out;
    for (const auto & r : rows) {
        for (std::size_t i = 0; i < r.size(); ++i) {
            if (i) out += ',';
            out += io::format_double(r[i]);
        }
        out += '\n';
    }
    io::write_file_atomic(path, out);
}

std::string pad4(int i) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d", i);
    return buf;
}

// Flags shared by `sample` and `sweep`.
struct GuidanceFlags {
    double omega_s = 0.0;
    std::string omega_c = "none";
    std::string retain = "0:0.1";
    bool asym = false;
    std::string renorm = "spectral";
    double eps = 1e-8;
    std::string hooks = "all.v";
    std::string weak = "spectral";
    double temperature = 1.0;
    int top_k = 0;
    std::string condition = "null";
    bool unhooked_prefill = false;

    void add_common(CLI::App * app) {
        app->add_option("--renorm", renorm, "none|spectral|spatial|unit-spatial")->capture_default_str();
        app->add_option("--eps", eps, "renormalization epsilon")->capture_default_str();
        app->add_flag("--asym", asym, "do not symmetrize the retention mask");
        app->add_option("--temperature", temperature, "sampling temperature")->capture_default_str();
        app->add_option("--top-k", top_k, "top-k truncation, 0 disables")->capture_default_str();
        app->add_option("--class", condition, "class id, 'null' (unconditional) or 'cycle'")->capture_default_str();
        app->add_flag("--unhooked-prefill", unhooked_prefill, "feed the prompt prefix to the weak branch unhooked");
    }

    guidance::GuidanceConfig build(const model::ModelConfig & mc, double os, std::optional<double> oc,
                                   std::pair<double, double> band, const std::string & hook_text,
                                   model::WeakKind kind) const {
        guidance::GuidanceConfig g;
        g.omega_s = os;
        g.omega_c = oc;
        g.weak.sites = flag("--hooks", [&] { return model::parse_hook_sites(hook_text, mc.layers); });
        g.weak.mask = spectral::SelectionMask::from_range(std::size_t(mc.hidden), band.first, band.second, !asym);
        g.weak.mode.kind = flag("--renorm", [&] { return spectral::parse_renorm_kind(renorm); });
        g.weak.mode.epsilon = eps;
        g.weak.kind = kind;
        g.sampler.temperature = temperature;
        g.sampler.top_k = top_k;
        g.hooked_prefill = !unhooked_prefill;
        if (!(eps > 0.0)) throw UsageError("--eps: must be positive");
        if (!(temperature > 0.0)) throw UsageError("--temperature: must be positive");
        if (top_k < 0) throw UsageError("--top-k: must be >= 0");
        if (!(os >= 0.0)) throw UsageError("--omega-s: must be >= 0");
        if (oc && !(*oc >= 0.0)) throw UsageError("--omega-c: must be >= 0");
        for (const auto & h : g.weak.sites)
            if (h.layer < 0 || h.layer >= mc.layers)
                throw UsageError("--hooks: layer " + std::to_string(h.layer) + " outside [0, " +
                                 std::to_string(mc.layers) + ")");
        return g;
    }
};

model::ModelWeights load_model_file(const std::string & path) {
    try {
        return model::load_weights(path);
    } catch (const FormatError & e) {
        throw FormatError(e.field(), path + ": " + e.what());
    }
}

int cmd_gen_data(int count, uint64_t seed, int classes, int side, const std::string & out_path, std::ostream & out) {
    if (count <= 0) throw UsageError("--count: must be positive");
    if (classes <= 0 || classes > dataset::kMaxClasses) throw UsageError("--classes: must be in [1, 8]");
    if (side < 6) throw UsageError("--side: must be at least 6");
    const auto corpus = dataset::generate_corpus(count, seed, classes, side);
    io::write_file_atomic(out_path, dataset::encode_corpus(corpus));
    out << "wrote " << corpus.size() << " grids to " << out_path << "\n";
    return kExitOk;
}

int cmd_train(const std::string & corpus_path, const std::string & config_path, int steps, uint64_t seed,
              const std::string & out_path, std::string loss_path, std::ostream & out) {
    if (steps < 0) throw UsageError("--steps: must be non-negative");
    model::ModelConfig mc;
    train::TrainConfig tc;
    if (!config_path.empty()) {
        try {
            train::apply_config_text(io::read_file(config_path), mc, tc);
        } catch (const InvalidArgument & e) {
            throw FormatError(config_path, e.what());
        }
    }
    dataset::Corpus corpus;
    try {
        corpus = dataset::decode_corpus(io::read_file(corpus_path));
    } catch (const FormatError & e) {
        throw FormatError(corpus_path, e.what());
    }
    if (int(corpus.front().tokens.size()) + 2 > mc.max_seq)
        throw FormatError(corpus_path, "grids do not fit the model's max_seq");
    for (const auto & g : corpus)
        if (g.class_id >= mc.class_count) throw FormatError(corpus_path, "class id exceeds class_count");

    const auto res = train::train(corpus, mc, tc, steps, seed);
    if (loss_path.empty()) loss_path = out_path + ".loss.csv";
    std::string csv = "step,loss\n";
    for (std::size_t i = 0; i < res.losses.size(); ++i)
        csv += std::to_string(i) + "," + io::format_double(res.losses[i]) + "\n";
    io::write_file_atomic(loss_path, csv);
    model::save_weights(res.weights, out_path);
    if (!res.losses.empty())
        out << "loss " << io::format_double(res.losses.front()) << " -> " << io::format_double(res.losses.back())
            << "\n";
    out << "wrote " << out_path << " and " << loss_path << "\n";
    return kExitOk;
}

std::string summary_json(const experiment::CellResult & r) {
    nlohmann::ordered_json j;
    j["n"] = r.n;
    j["validity_rate"] = r.validity_rate;
    j["valid_match_rate"] = r.valid_match_rate;
    j["mean_score"] = r.mean_score;
    j["mean_final_base_entropy"] = r.mean_final_base_entropy;
    j["mean_final_perturbed_entropy"] = r.mean_final_perturbed_entropy;
    j["mean_final_entropy_gap"] = r.mean_final_entropy_gap;
    return j.dump(2) + "\n";
}

int cmd_sample(const std::string & weights_path, const GuidanceFlags & gf, double omega_s,
               const std::string & omega_c_text, int n, uint64_t seed, const std::string & out_dir, bool trace_json,
               std::ostream & out) {
    if (n <= 0) throw UsageError("--n: must be positive");
    const auto weights = load_model_file(weights_path);
    const model::Model m(weights);
    const auto & mc = m.config();
    const auto band = flag("--retain", [&] { return parse_band(gf.retain); });
    const auto cond = flag("--class", [&] { return parse_condition(gf.condition, mc.class_count); });
    std::optional<double> oc;
    if (omega_c_text != "none") oc = flag("--omega-c", [&] { return io::parse_double(omega_c_text, "omega_c"); });
    if (oc && cond.kind == experiment::Conditioning::Kind::Unconditional)
        throw UsageError("--omega-c: CFG needs --class (a class id or cycle)");
    const auto kind = flag("--weak", [&] { return model::parse_weak_kind(gf.weak); });
    const auto cfg = gf.build(mc, omega_s, oc, band, gf.hooks, kind);

    int side = 0;
    while ((side + 1) * (side + 1) + 2 <= mc.max_seq) ++side;
    const auto outcomes = experiment::run_samples(m, cfg, cond, n, seed, side, 1, trace_json);

    const fs::path dir(out_dir);
    std::string tokens = "sample,condition,valid,class_match,score";
    for (int i = 0; i < side * side; ++i) tokens += ",t" + std::to_string(i);
    tokens += "\n";
    for (int i = 0; i < n; ++i) {
        const auto & o = outcomes[i];
        tokens += std::to_string(i) + "," + (o.condition ? std::to_string(*o.condition) : "null") + "," +
                  (o.validity.valid ? "1" : "0") + "," +
                  (o.validity.class_match ? (*o.validity.class_match ? "1" : "0") : "") + "," +
                  io::format_double(o.validity.score);
        for (int t : o.generation.image) tokens += "," + std::to_string(t);
        tokens += "\n";
        io::write_file_atomic(dir / "renders" / ("sample_" + pad4(i) + ".pgm"),
                              dataset::render_pgm(o.generation.image, side));
        io::write_file_atomic(dir / "traces" / ("trace_" + pad4(i) + ".csv"), guidance::trace_csv(o.generation.trace));
        if (trace_json)
            io::write_file_atomic(dir / "traces" / ("trace_" + pad4(i) + ".json"),
                                  guidance::trace_json(o.generation.trace));
    }
    io::write_file_atomic(dir / "tokens.csv", tokens);
    const auto summary = experiment::summarize(outcomes);
    io::write_file_atomic(dir / "summary.json", summary_json(summary));
    out << summary_json(summary);
    return kExitOk;
}

struct SweepFlags {
    std::string omega_s = "0,1,2,3,4";
    std::string omega_c = "none";
    std::string retain = "0:0.1";
    std::string hooks = "all.v";
    std::string weak = "spectral";
};

int cmd_sweep(const std::string & weights_path, const GuidanceFlags & gf, const SweepFlags & sf, int n,
              uint64_t seed, const std::string & out_path, std::ostream & out) {
    if (n <= 0) throw UsageError("--n: must be positive");
    const auto weights = load_model_file(weights_path);
    const model::Model m(weights);
    const auto & mc = m.config();
    const auto cond = flag("--class", [&] { return parse_condition(gf.condition, mc.class_count); });
    const auto os_list = flag("--omega-s", [&] { return parse_doubles(sf.omega_s, "omega_s"); });
    const auto oc_list = flag("--omega-c", [&] { return parse_optional_doubles(sf.omega_c, "omega_c"); });
    std::vector<std::pair<double, double>> bands;
    flag("--retain", [&] {
        for (const auto & b : io::split(sf.retain, ',')) bands.push_back(parse_band(std::string(io::trim(b))));
        return 0;
    });
    std::vector<std::string> hook_sets;
    for (const auto & h : io::split(sf.hooks, ';'))
        if (!io::trim(h).empty()) hook_sets.emplace_back(io::trim(h));
    std::vector<model::WeakKind> kinds;
    flag("--weak", [&] {
        for (const auto & w : io::split(sf.weak, ',')) kinds.push_back(model::parse_weak_kind(std::string(io::trim(w))));
        return 0;
    });
    if (hook_sets.empty()) throw UsageError("--hooks: empty grid");
    for (const auto & oc : oc_list)
        if (oc && cond.kind == experiment::Conditioning::Kind::Unconditional)
            throw UsageError("--omega-c: CFG needs --class (a class id or cycle)");

    struct Cell {
        guidance::GuidanceConfig cfg;
        std::string oc, band, hooks, weak;
    };
    std::vector<Cell> cells;
    for (auto kind : kinds)
        for (const auto & hooks : hook_sets)
            for (const auto & band : bands)
                for (const auto & oc : oc_list)
                    for (double os : os_list)
                        cells.push_back({gf.build(mc, os, oc, band, hooks, kind),
                                         oc ? io::format_double(*oc) : "none", band_string(band), hooks,
                                         model::to_string(kind)});

    int side = 0;
    while ((side + 1) * (side + 1) + 2 <= mc.max_seq) ++side;
    std::vector<std::vector<experiment::SampleOutcome>> results(cells.size(), std::vector<experiment::SampleOutcome>(n));
    experiment::parallel_for(int(cells.size()) * n, 0, [&](int job) {
        const int c = job / n, i = job % n;
        results[c][i] = experiment::run_sample(m, cells[c].cfg, cond, i, seed, side);
    });

    std::string csv = "omega_s,omega_c,retain,hooks,weak,renorm,n,validity_rate,valid_match_rate,mean_score,"
                      "mean_final_entropy_gap\n";
    for (std::size_t c = 0; c < cells.size(); ++c) {
        const auto r = experiment::summarize(results[c]);
        const auto & cell = cells[c];
        csv += io::format_double(cell.cfg.omega_s) + "," + cell.oc + "," + cell.band + ",\"" + cell.hooks + "\"," +
               cell.weak + "," + spectral::to_string(cell.cfg.weak.mode.kind) + "," + std::to_string(r.n) + "," +
               io::format_double(r.validity_rate) + "," + io::format_double(r.valid_match_rate) + "," +
               io::format_double(r.mean_score) + "," + io::format_double(r.mean_final_entropy_gap) + "\n";
    }
    io::write_file_atomic(out_path, csv);
    out << csv;
    return kExitOk;
}

int cmd_verify_theory(int dim_x, int dim_z, int trials, int mask_rank, uint64_t seed, const std::string & out_path,
                      std::ostream & out) {
    if (dim_x <= 0) throw UsageError("--dim-x: must be positive");
    if (dim_z <= 0) throw UsageError("--dim-z: must be positive");
    if (trials <= 0) throw UsageError("--trials: must be positive");
    if (mask_rank < 0 || mask_rank > dim_x) throw UsageError("--mask-rank: must be in [0, dim-x]");
    const auto rep = flag("--mask-rank", [&] { return infotheory::run_theory_checks(dim_x, dim_z, trials, seed, mask_rank); });
    const std::string json = rep.to_json();
    if (!out_path.empty()) io::write_file_atomic(out_path, json);
    out << json;
    return rep.ok() ? kExitOk : kExitData;
}

std::vector<double> read_entropy_column(const fs::path & file, int column, std::vector<double> * other, int other_col) {
    const std::string text = io::read_file(file);
    const auto lines = io::split(text, '\n');
    std::vector<double> vals;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        if (io::trim(lines[i]).empty()) continue;
        const auto cells = io::split(lines[i], ',');
        if (cells.size() < 4) throw FormatError(file.string(), "line " + std::to_string(i + 1) + " has too few columns");
        try {
            vals.push_back(io::parse_double(cells[column], "entropy"));
            other->push_back(io::parse_double(cells[other_col], "entropy"));
        } catch (const InvalidArgument & e) {
            throw FormatError(file.string(), "line " + std::to_string(i + 1) + ": " + e.what());
        }
    }
    if (lines.empty() || io::trim(lines[0]) != "step,base_entropy,perturbed_entropy,sampled_token")
        throw FormatError(file.string(), "missing trace header");
    return vals;
}

int cmd_analyze_entropy(const std::string & trace_dir, const std::string & out_path, std::ostream & out) {
    fs::path dir(trace_dir);
    if (fs::is_directory(dir / "traces")) dir /= "traces";
    std::vector<fs::path> files;
    for (const auto & e : fs::directory_iterator(dir)) {
        const auto name = e.path().filename().string();
        if (e.is_regular_file() && name.starts_with("trace_") && e.path().extension() == ".csv") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) throw FormatError(trace_dir, "no trace_*.csv files");

    std::vector<std::vector<double>> base_cum, pert_cum;
    std::size_t steps = 0;
    for (const auto & f : files) {
        std::vector<double> pert;
        auto base = read_entropy_column(f, 1, &pert, 2);
        if (base_cum.empty()) steps = base.size();
        if (base.size() != steps) throw FormatError(f.string(), "trace length differs from " + files.front().string());
        for (std::size_t t = 1; t < steps; ++t) {
            base[t] += base[t - 1];
            pert[t] += pert[t - 1];
        }
        base_cum.push_back(std::move(base));
        pert_cum.push_back(std::move(pert));
    }

    auto stats = [](const std::vector<std::vector<double>> & v, std::size_t t) {
        double mean = 0.0;
        for (const auto & r : v) mean += r[t];
        mean /= double(v.size());
        double var = 0.0;
        for (const auto & r : v) var += (r[t] - mean) * (r[t] - mean);
        const double sd = v.size() > 1 ? std::sqrt(var / double(v.size() - 1)) : 0.0;
        return std::pair{mean, sd};
    };
    std::string csv = "step,n,base_mean,base_std,perturbed_mean,perturbed_std\n";
    for (std::size_t t = 0; t < steps; ++t) {
        const auto [bm, bs] = stats(base_cum, t);
        const auto [pm, ps] = stats(pert_cum, t);
        csv += std::to_string(t) + "," + std::to_string(files.size()) + "," + io::format_double(bm) + "," +
               io::format_double(bs) + "," + io::format_double(pm) + "," + io::format_double(ps) + "\n";
    }
    io::write_file_atomic(out_path, csv);
    out << "analyzed " << files.size() << " traces of " << steps << " steps -> " << out_path << "\n";
    return kExitOk;
}

int cmd_weaken(const std::string & in_path, const std::string & out_path, const std::string & retain, bool asym,
               const std::string & renorm, double eps, std::ostream & out) {
    const auto band = flag("--retain", [&] { return parse_band(retain); });
    const auto kind = flag("--renorm", [&] { return spectral::parse_renorm_kind(renorm); });
    if (!(eps > 0.0)) throw UsageError("--eps: must be positive");
    const std::string text = io::read_file(in_path);
    std::vector<std::vector<double>> rows;
    int line_no = 0;
    for (const auto & line : io::split(text, '\n')) {
        ++line_no;
        if (io::trim(line).empty()) continue;
        std::vector<double> v;
        try {
            for (const auto & cell : io::split(line, ',')) v.push_back(io::parse_double(cell, "value"));
        } catch (const InvalidArgument & e) {
            throw FormatError(in_path, "line " + std::to_string(line_no) + ": " + e.what());
        }
        for (double x : v)
            if (!std::isfinite(x)) throw FormatError(in_path, "line " + std::to_string(line_no) + ": non-finite value");
        const auto mask = spectral::SelectionMask::from_range(v.size(), band.first, band.second, !asym);
        rows.push_back(spectral::weaken(v, mask, {kind, eps}));
    }
    write_csv_vectors(out_path, rows);
    out << "weakened " << rows.size() << " vectors -> " << out_path << "\n";
    return kExitOk;
}

} // namespace

int run(const std::vector<std::string> & args, std::ostream & out, std::ostream & err) {
    CLI::App app{"Spectrum weakening guidance toolkit", "swg"};
    app.require_subcommand(1);

    // gen-data
    int gd_count = 4096, gd_classes = 8, gd_side = 8;
    uint64_t gd_seed = 0;
    std::string gd_out;
    auto * gen = app.add_subcommand("gen-data", "generate a grid corpus");
    gen->add_option("--count", gd_count, "number of grids")->capture_default_str();
    gen->add_option("--seed", gd_seed, "root seed")->capture_default_str();
    gen->add_option("--classes", gd_classes, "number of pattern classes")->capture_default_str();
    gen->add_option("--side", gd_side, "grid side")->capture_default_str();
    gen->add_option("--out", gd_out, "corpus file")->required();

    // train
    std::string tr_corpus, tr_config, tr_out, tr_loss;
    int tr_steps = 2000;
    uint64_t tr_seed = 0;
    auto * tr = app.add_subcommand("train", "train the toy model");
    tr->add_option("--corpus", tr_corpus, "corpus file")->required()->check(CLI::ExistingFile);
    tr->add_option("--config", tr_config, "key=value training config")->check(CLI::ExistingFile);
    tr->add_option("--steps", tr_steps, "optimizer steps")->capture_default_str();
    tr->add_option("--seed", tr_seed, "root seed")->capture_default_str();
    tr->add_option("--out", tr_out, "weight file")->required();
    tr->add_option("--loss-csv", tr_loss, "loss curve (default <out>.loss.csv)");

    // sample
    GuidanceFlags sa_g;
    std::string sa_weights, sa_out, sa_omega_c = "none";
    double sa_omega_s = 0.0;
    int sa_n = 16;
    uint64_t sa_seed = 0;
    bool sa_json = false;
    auto * sa = app.add_subcommand("sample", "guided sampling");
    sa->add_option("--weights", sa_weights, "weight file")->required()->check(CLI::ExistingFile);
    sa->add_option("--omega-s", sa_omega_s, "SWG scale")->capture_default_str();
    sa->add_option("--omega-c", sa_omega_c, "CFG scale or 'none'")->capture_default_str();
    sa->add_option("--retain", sa_g.retain, "retained band lo:hi")->capture_default_str();
    sa->add_option("--hooks", sa_g.hooks, "hook sites, e.g. 0.v,1.v or all.v")->capture_default_str();
    sa->add_option("--weak", sa_g.weak, "spectral|avg|prune")->capture_default_str();
    sa_g.add_common(sa);
    sa->add_option("--n", sa_n, "number of samples")->capture_default_str();
    sa->add_option("--seed", sa_seed, "root seed")->capture_default_str();
    sa->add_option("--out", sa_out, "output directory")->required();
    sa->add_flag("--trace-json", sa_json, "also write full StepTrace JSON per sample");

    // sweep
    GuidanceFlags sw_g;
    SweepFlags sw_f;
    std::string sw_weights, sw_out;
    int sw_n = 256;
    uint64_t sw_seed = 0;
    auto * sw = app.add_subcommand("sweep", "guidance-scale grid");
    sw->add_option("--weights", sw_weights, "weight file")->required()->check(CLI::ExistingFile);
    sw->add_option("--omega-s", sw_f.omega_s, "comma list of SWG scales")->capture_default_str();
    sw->add_option("--omega-c", sw_f.omega_c, "comma list of CFG scales ('none' allowed)")->capture_default_str();
    sw->add_option("--retain", sw_f.retain, "comma list of lo:hi bands")->capture_default_str();
    sw->add_option("--hooks", sw_f.hooks, "';'-separated list of hook sets")->capture_default_str();
    sw->add_option("--weak", sw_f.weak, "comma list of spectral|avg|prune")->capture_default_str();
    sw_g.add_common(sw);
    sw->add_option("--n", sw_n, "samples per cell")->capture_default_str();
    sw->add_option("--seed", sw_seed, "root seed")->capture_default_str();
    sw->add_option("--out", sw_out, "metrics CSV")->required();

    // verify-theory
    int vt_dx = 16, vt_dz = 4, vt_trials = 100, vt_rank = 4;
    uint64_t vt_seed = 0;
    std::string vt_out;
    auto * vt = app.add_subcommand("verify-theory", "Gaussian information-loss checks");
    vt->add_option("--dim-x", vt_dx, "feature dimension")->capture_default_str();
    vt->add_option("--dim-z", vt_dz, "auxiliary dimension")->capture_default_str();
    vt->add_option("--trials", vt_trials, "random instances")->capture_default_str();
    vt->add_option("--mask-rank", vt_rank, "retained spectral components")->capture_default_str();
    vt->add_option("--seed", vt_seed, "root seed")->capture_default_str();
    vt->add_option("--out", vt_out, "JSON report file");

    // analyze-entropy
    std::string ae_dir, ae_out;
    auto * ae = app.add_subcommand("analyze-entropy", "cumulative entropy statistics of StepTrace CSVs");
    ae->add_option("--traces", ae_dir, "directory of trace_*.csv (or a sample output dir)")
        ->required()
        ->check(CLI::ExistingDirectory);
    ae->add_option("--out", ae_out, "output CSV")->required();

    // weaken
    std::string wk_in, wk_out, wk_retain = "0:0.1", wk_renorm = "spectral";
    bool wk_asym = false;
    double wk_eps = 1e-8;
    auto * wk = app.add_subcommand("weaken", "apply spectral weakening to CSV vectors");
    wk->add_option("--in", wk_in, "input CSV, one vector per line")->required()->check(CLI::ExistingFile);
    wk->add_option("--out", wk_out, "output CSV")->required();
    wk->add_option("--retain", wk_retain, "retained band lo:hi")->capture_default_str();
    wk->add_flag("--asym", wk_asym, "do not symmetrize the mask");
    wk->add_option("--renorm", wk_renorm, "none|spectral|spatial|unit-spatial")->capture_default_str();
    wk->add_option("--eps", wk_eps, "renormalization epsilon")->capture_default_str();

    try {
        std::vector<std::string> rev(args.rbegin(), args.rend());
        app.parse(rev);
    } catch (const CLI::CallForHelp &) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp &) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::ParseError & e) {
        err << "error: " << e.what() << "\n";
        return kExitUsage;
    }

    try {
        if (*gen) return cmd_gen_data(gd_count, gd_seed, gd_classes, gd_side, gd_out, out);
        if (*tr) return cmd_train(tr_corpus, tr_config, tr_steps, tr_seed, tr_out, tr_loss, out);
        if (*sa) return cmd_sample(sa_weights, sa_g, sa_omega_s, sa_omega_c, sa_n, sa_seed, sa_out, sa_json, out);
        if (*sw) return cmd_sweep(sw_weights, sw_g, sw_f, sw_n, sw_seed, sw_out, out);
        if (*vt) return cmd_verify_theory(vt_dx, vt_dz, vt_trials, vt_rank, vt_seed, vt_out, out);
        if (*ae) return cmd_analyze_entropy(ae_dir, ae_out, out);
        if (*wk) return cmd_weaken(wk_in, wk_out, wk_retain, wk_asym, wk_renorm, wk_eps, out);
    } catch (const UsageError & e) {
        err << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const FormatError & e) {
        err << "error: " << e.what() << "\n";
        return kExitData;
    } catch (const std::exception & e) {
        err << "error: " << e.what() << "\n";
        return kExitData;
    }
    return kExitUsage;
}

int main(int argc, char ** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return run(args, std::cout, std::cerr);
}

} // namespace swg::cli
