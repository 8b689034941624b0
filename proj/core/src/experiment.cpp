#include "multigrad/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <sstream>
#include <stdexcept>
#include <thread>
#include <utility>

#include <json.hpp>

#include "multigrad/errors.hpp"

namespace multigrad {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& msg) {
    throw ParseError(path + ": " + msg);
}

const json* find(const json& obj, const char* key) {
    auto it = obj.find(key);
    return it == obj.end() ? nullptr : &*it;
}

void check_keys(const json& obj, const std::string& path,
                std::initializer_list<const char*> allowed) {
    for (const auto& item : obj.items()) {
        bool known = false;
        for (const char* k : allowed)
            if (item.key() == k) { known = true; break; }
        if (!known) fail(path + "." + item.key(), "unknown field");
    }
}

double get_number(const json& j, const std::string& path) {
    if (!j.is_number()) fail(path, "expected a number");
    return j.get<double>();
}

bool get_bool(const json& j, const std::string& path) {
    if (!j.is_boolean()) fail(path, "expected a boolean");
    return j.get<bool>();
}

std::uint64_t get_unsigned(const json& j, const std::string& path) {
    if (!j.is_number_unsigned()) fail(path, "expected a nonnegative integer");
    return j.get<std::uint64_t>();
}

std::string get_string(const json& j, const std::string& path) {
    if (!j.is_string()) fail(path, "expected a string");
    return j.get<std::string>();
}

Schedule parse_schedule(const json& j, const std::string& path) {
    if (!j.is_object()) fail(path, "expected an object");
    check_keys(j, path, {"kind", "lr0", "ratio", "every"});
    std::string kind = "step_decay";
    if (const json* v = find(j, "kind")) kind = get_string(*v, path + ".kind");
    Schedule s = Schedule::step_decay(0.2, 0.5, 1000);
    if (const json* v = find(j, "lr0")) s.lr0 = get_number(*v, path + ".lr0");
    if (kind == "constant") {
        s.ratio = 1.0;
        s.every = 0;
    } else if (kind == "step_decay") {
        if (const json* v = find(j, "ratio")) s.ratio = get_number(*v, path + ".ratio");
        if (const json* v = find(j, "every"))
            s.every = static_cast<std::size_t>(get_unsigned(*v, path + ".every"));
        if (s.every == 0) fail(path + ".every", "must be >= 1");
        if (!(s.ratio > 0.0) || s.ratio > 1.0)
            fail(path + ".ratio", "must lie in (0, 1]");
    } else {
        fail(path + ".kind", "unknown schedule kind '" + kind + "'");
    }
    if (!(s.lr0 > 0.0)) fail(path + ".lr0", "must be positive");
    return s;
}

MethodConfig parse_method(const json& j, const std::string& path) {
    MethodConfig m;
    std::string kind_str;
    const json* obj = nullptr;
    if (j.is_string()) {
        kind_str = j.get<std::string>();
        m.label = kind_str;
    } else if (j.is_object()) {
        obj = &j;
        check_keys(j, path,
                   {"name", "kind", "k", "leaks", "marginalize", "renormalize",
                    "clip_norm", "optimizer", "momentum", "schedule",
                    "gradnorm_alpha", "gradnorm_lr"});
        if (const json* v = find(j, "name")) m.label = get_string(*v, path + ".name");
        if (const json* v = find(j, "kind")) kind_str = get_string(*v, path + ".kind");
        if (kind_str.empty()) kind_str = m.label;
        if (m.label.empty()) m.label = kind_str;
        if (kind_str.empty()) fail(path, "method needs a name or kind");
    } else {
        fail(path, "expected a method name or object");
    }

    if (kind_str == "graddrop") {
        m.kind = CombinerKind::GradDrop;
    } else if (kind_str == "random_graddrop") {
        m.kind = CombinerKind::GradDrop;
        m.k = 0.0;
    } else if (kind_str == "naive" || kind_str == "naive_sum" || kind_str == "sum") {
        m.kind = CombinerKind::NaiveSum;
    } else if (kind_str == "clip" || kind_str == "clipping") {
        m.kind = CombinerKind::NaiveSum;
        m.clip_norm = 1.0;
    } else if (kind_str == "pcgrad" || kind_str == "pcgrad_iterative") {
        m.kind = CombinerKind::PcgradIterative;
    } else if (kind_str == "pcgrad_static") {
        m.kind = CombinerKind::PcgradStatic;
    } else if (kind_str == "mgda") {
        m.kind = CombinerKind::Mgda;
    } else if (kind_str == "gradnorm") {
        m.kind = CombinerKind::GradNorm;
    } else {
        fail(path + (obj ? ".kind" : ""), "unknown method kind '" + kind_str + "'");
    }

    if (obj) {
        if (const json* v = find(*obj, "k")) {
            m.k = get_number(*v, path + ".k");
            if (!(m.k >= 0.0)) fail(path + ".k", "must be >= 0");
        }
        if (const json* v = find(*obj, "leaks")) {
            if (!v->is_array()) fail(path + ".leaks", "expected an array");
            m.leaks.clear();
            std::size_t i = 0;
            for (const json& e : *v) {
                std::string p = path + ".leaks[" + std::to_string(i++) + "]";
                double l = get_number(e, p);
                if (!(l >= 0.0) || l > 1.0) fail(p, "must lie in [0, 1]");
                m.leaks.push_back(l);
            }
        }
        if (const json* v = find(*obj, "marginalize"))
            m.marginalize = get_bool(*v, path + ".marginalize");
        if (const json* v = find(*obj, "renormalize"))
            m.renormalize = get_bool(*v, path + ".renormalize");
        if (const json* v = find(*obj, "clip_norm")) {
            m.clip_norm = get_number(*v, path + ".clip_norm");
            if (!(m.clip_norm >= 0.0)) fail(path + ".clip_norm", "must be >= 0");
        }
        if (const json* v = find(*obj, "optimizer")) {
            std::string o = get_string(*v, path + ".optimizer");
            if (o == "sgd") m.optimizer = OptimizerKind::Sgd;
            else if (o == "adam") m.optimizer = OptimizerKind::Adam;
            else fail(path + ".optimizer", "unknown optimizer '" + o + "'");
        }
        if (const json* v = find(*obj, "momentum")) {
            m.momentum = get_number(*v, path + ".momentum");
            if (!(m.momentum >= 0.0) || m.momentum >= 1.0)
                fail(path + ".momentum", "must lie in [0, 1)");
        }
        if (const json* v = find(*obj, "schedule"))
            m.schedule = parse_schedule(*v, path + ".schedule");
        if (const json* v = find(*obj, "gradnorm_alpha")) {
            m.gradnorm_alpha = get_number(*v, path + ".gradnorm_alpha");
            if (!(m.gradnorm_alpha >= 0.0))
                fail(path + ".gradnorm_alpha", "must be >= 0");
        }
        if (const json* v = find(*obj, "gradnorm_lr")) {
            m.gradnorm_lr = get_number(*v, path + ".gradnorm_lr");
            if (!(m.gradnorm_lr > 0.0)) fail(path + ".gradnorm_lr", "must be positive");
        }
    }

    if (m.label.empty()) fail(path, "method name must be nonempty");
    if (m.label.find(',') != std::string::npos ||
        m.label.find('\n') != std::string::npos)
        fail(path + ".name", "method name must not contain commas or newlines");
    return m;
}

ProblemSpec parse_problem(const json& j, const std::string& path) {
    ProblemSpec ps;
    if (j.is_string()) {
        ps.name = j.get<std::string>();
    } else if (j.is_object()) {
        check_keys(j, path, {"name", "c", "seed", "hidden", "tasks"});
        const json* v = find(j, "name");
        if (!v) fail(path + ".name", "missing required field");
        ps.name = get_string(*v, path + ".name");
        if (const json* e = find(j, "c")) ps.c = get_number(*e, path + ".c");
        if (const json* e = find(j, "seed")) ps.seed = get_unsigned(*e, path + ".seed");
        if (const json* e = find(j, "hidden")) {
            ps.hidden = static_cast<std::size_t>(get_unsigned(*e, path + ".hidden"));
            if (ps.hidden == 0) fail(path + ".hidden", "must be >= 1");
        }
        if (const json* e = find(j, "tasks")) {
            ps.tasks = static_cast<std::size_t>(get_unsigned(*e, path + ".tasks"));
            if (ps.tasks == 0) fail(path + ".tasks", "must be >= 1");
        }
    } else {
        fail(path, "expected a problem name or object");
    }
    if (ps.name != "sines" && ps.name != "quad_pair" &&
        ps.name != "mlp_multitask" && ps.name != "transfer_toy")
        fail(path + ".name", "unknown problem '" + ps.name + "'");
    return ps;
}

std::string method_kind_string(CombinerKind k) {
    switch (k) {
    case CombinerKind::GradDrop: return "graddrop";
    case CombinerKind::NaiveSum: return "naive_sum";
    case CombinerKind::PcgradStatic: return "pcgrad_static";
    case CombinerKind::PcgradIterative: return "pcgrad_iterative";
    case CombinerKind::Mgda: return "mgda";
    case CombinerKind::GradNorm: return "gradnorm";
    }
    return "unknown";
}

std::string sanitize_label(const std::string& label) {
    std::string out = label;
    for (char& c : out) {
        bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
                  (c >= '0' && c <= '9') || c == '_' || c == '-';
        if (!ok) c = '_';
    }
    return out;
}

void write_file(const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
    out << content;
    out.flush();
    if (!out.good()) throw std::runtime_error("write failed: " + path.string());
}

} // namespace

ExperimentSpec parse_spec(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open spec file: " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_spec_text(buf.str(), path);
}

ExperimentSpec parse_spec_text(const std::string& text, const std::string& origin) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        std::size_t line = 1, col = 1;
        for (std::size_t i = 0; i + 1 < e.byte && i < text.size(); ++i) {
            if (text[i] == '\n') { ++line; col = 1; }
            else ++col;
        }
        throw ParseError(origin + ":" + std::to_string(line) + ":" +
                         std::to_string(col) + ": " + e.what());
    }
    if (!j.is_object()) fail(origin, "top level must be an object");
    check_keys(j, origin,
               {"problem", "methods", "steps", "trials", "seed", "out_dir",
                "traj_trials", "keep_every", "oracle"});

    ExperimentSpec spec;
    if (const json* v = find(j, "problem"))
        spec.problem = parse_problem(*v, origin + ".problem");

    const json* ms = find(j, "methods");
    if (!ms) fail(origin + ".methods", "missing required field");
    if (!ms->is_array() || ms->empty())
        fail(origin + ".methods", "expected a nonempty array");
    std::size_t i = 0;
    for (const json& e : *ms) {
        std::string p = origin + ".methods[" + std::to_string(i++) + "]";
        spec.methods.push_back(parse_method(e, p));
    }
    for (std::size_t a = 0; a < spec.methods.size(); ++a)
        for (std::size_t b = a + 1; b < spec.methods.size(); ++b)
            if (spec.methods[a].label == spec.methods[b].label)
                fail(origin + ".methods", "duplicate method name '" +
                                              spec.methods[a].label + "'");

    if (const json* v = find(j, "steps")) {
        spec.steps = static_cast<std::size_t>(get_unsigned(*v, origin + ".steps"));
        if (spec.steps == 0) fail(origin + ".steps", "must be >= 1");
    }
    if (const json* v = find(j, "trials")) {
        spec.trials = static_cast<std::size_t>(get_unsigned(*v, origin + ".trials"));
        if (spec.trials == 0) fail(origin + ".trials", "must be >= 1");
    }
    if (const json* v = find(j, "seed")) spec.seed = get_unsigned(*v, origin + ".seed");
    if (const json* v = find(j, "out_dir"))
        spec.out_dir = get_string(*v, origin + ".out_dir");
    if (const json* v = find(j, "traj_trials"))
        spec.traj_trials =
            static_cast<std::size_t>(get_unsigned(*v, origin + ".traj_trials"));
    if (const json* v = find(j, "keep_every")) {
        spec.keep_every =
            static_cast<std::size_t>(get_unsigned(*v, origin + ".keep_every"));
        if (spec.keep_every == 0) fail(origin + ".keep_every", "must be >= 1");
    }
    if (const json* v = find(j, "oracle")) {
        if (!v->is_object()) fail(origin + ".oracle", "expected an object");
        check_keys(*v, origin + ".oracle", {"lo", "hi", "step", "tol"});
        if (const json* e = find(*v, "lo")) spec.oracle.lo = get_number(*e, origin + ".oracle.lo");
        if (const json* e = find(*v, "hi")) spec.oracle.hi = get_number(*e, origin + ".oracle.hi");
        if (const json* e = find(*v, "step")) spec.oracle.step = get_number(*e, origin + ".oracle.step");
        if (const json* e = find(*v, "tol")) spec.oracle.tol = get_number(*e, origin + ".oracle.tol");
        if (!(spec.oracle.lo < spec.oracle.hi))
            fail(origin + ".oracle", "need lo < hi");
        if (!(spec.oracle.step > 0.0)) fail(origin + ".oracle.step", "must be positive");
        if (!(spec.oracle.tol >= 0.0)) fail(origin + ".oracle.tol", "must be >= 0");
    }
    return spec;
}

std::string resolved_json(const ExperimentSpec& spec) {
    json j;
    j["problem"] = {{"name", spec.problem.name},
                    {"c", spec.problem.c},
                    {"seed", spec.problem.seed},
                    {"hidden", spec.problem.hidden},
                    {"tasks", spec.problem.tasks}};
    j["steps"] = spec.steps;
    j["trials"] = spec.trials;
    j["seed"] = spec.seed;
    j["out_dir"] = spec.out_dir;
    j["traj_trials"] = spec.traj_trials;
    j["keep_every"] = spec.keep_every;
    j["oracle"] = {{"lo", spec.oracle.lo},
                   {"hi", spec.oracle.hi},
                   {"step", spec.oracle.step},
                   {"tol", spec.oracle.tol}};
    json methods = json::array();
    for (const MethodConfig& m : spec.methods) {
        json e;
        e["name"] = m.label;
        e["kind"] = method_kind_string(m.kind);
        e["k"] = m.k;
        e["leaks"] = m.leaks;
        e["marginalize"] = m.marginalize;
        e["renormalize"] = m.renormalize;
        e["clip_norm"] = m.clip_norm;
        e["optimizer"] = m.optimizer == OptimizerKind::Sgd ? "sgd" : "adam";
        e["momentum"] = m.momentum;
        e["schedule"] = {{"kind", m.schedule.every == 0 ? "constant" : "step_decay"},
                         {"lr0", m.schedule.lr0},
                         {"ratio", m.schedule.ratio},
                         {"every", m.schedule.every}};
        e["gradnorm_alpha"] = m.gradnorm_alpha;
        e["gradnorm_lr"] = m.gradnorm_lr;
        methods.push_back(std::move(e));
    }
    j["methods"] = std::move(methods);
    return j.dump(2) + "\n";
}

std::unique_ptr<Problem> make_problem(const ProblemSpec& ps) {
    if (ps.name == "sines") return sines_problem();
    if (ps.name == "quad_pair") return quad_pair_problem(ps.c);
    if (ps.name == "mlp_multitask")
        return mlp_multitask_problem(ps.seed, ps.hidden, ps.tasks);
    if (ps.name == "transfer_toy") return transfer_toy_problem(ps.seed);
    throw ConfigError("make_problem: unknown problem '" + ps.name + "'");
}

std::uint64_t trial_seed(std::uint64_t base, std::size_t method_idx,
                         std::size_t trial_idx) {
    return hash_mix(hash_mix(mix64(base), method_idx), trial_idx);
}

double quantile(const std::vector<double>& sorted, double q) {
    if (sorted.empty()) return std::numeric_limits<double>::quiet_NaN();
    if (q <= 0.0) return sorted.front();
    if (q >= 1.0) return sorted.back();
    double pos = q * static_cast<double>(sorted.size() - 1);
    std::size_t lo = static_cast<std::size_t>(pos);
    double frac = pos - static_cast<double>(lo);
    if (lo + 1 >= sorted.size()) return sorted.back();
    return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

SummaryRow summarize(const std::string& method,
                     const std::vector<TrialRecord>& records, double oracle_loss,
                     double tol) {
    SummaryRow row;
    row.method = method;
    std::vector<double> finals;
    double wall = 0.0;
    std::size_t near = 0;
    for (const TrialRecord& r : records) {
        wall += r.wall_ms;
        if (r.diverged || !std::isfinite(r.final_loss)) {
            ++row.diverged;
            continue;
        }
        finals.push_back(r.final_loss);
        if (std::isfinite(oracle_loss) && r.final_loss <= oracle_loss + tol) ++near;
    }
    if (!records.empty()) row.mean_wall_ms = wall / static_cast<double>(records.size());
    if (finals.empty()) {
        row.failed = true;
        return row;
    }
    std::sort(finals.begin(), finals.end());
    row.min = finals.front();
    row.q1 = quantile(finals, 0.25);
    row.median = quantile(finals, 0.5);
    row.q3 = quantile(finals, 0.75);
    row.max = finals.back();
    double s = 0.0;
    for (double v : finals) s += v;
    row.mean = s / static_cast<double>(finals.size());
    if (std::isfinite(oracle_loss))
        row.oracle_frac = static_cast<double>(near) / static_cast<double>(finals.size());
    return row;
}

ExperimentResult run_experiment(const ExperimentSpec& spec, std::size_t workers) {
    if (spec.methods.empty()) throw ConfigError("run_experiment: no methods");
    if (spec.trials == 0) throw ConfigError("run_experiment: trials must be >= 1");

    ExperimentResult result;
    result.spec = spec;
    std::unique_ptr<Problem> problem = make_problem(spec.problem);

    if (problem->dim() == 1) {
        GridSearchResult gs = grid_search_min(*problem, spec.oracle.lo,
                                              spec.oracle.hi, spec.oracle.step);
        result.oracle_x = gs.x;
        result.oracle_loss = gs.loss;
    }

    const std::size_t n_methods = spec.methods.size();
    const std::size_t n_trials = spec.trials;
    result.records.assign(n_methods, std::vector<TrialRecord>(n_trials));

    std::size_t total = n_methods * n_trials;
    std::size_t width = workers ? workers : std::thread::hardware_concurrency();
    if (width == 0) width = 1;
    width = std::min(width, total);

    std::atomic<std::size_t> next{0};
    auto work = [&]() {
        for (;;) {
            std::size_t i = next.fetch_add(1);
            if (i >= total) return;
            std::size_t mi = i / n_trials;
            std::size_t ti = i % n_trials;
            std::uint64_t seed = trial_seed(spec.seed, mi, ti);
            TrialRecord rec;
            try {
                rec = train(*problem, spec.methods[mi], spec.steps, seed,
                            spec.keep_every);
            } catch (const std::exception&) {
                rec = TrialRecord{};
                rec.method = spec.methods[mi].label;
                rec.fingerprint = config_fingerprint(spec.methods[mi], spec.steps);
                rec.seed = seed;
                rec.diverged = true;
            }
            result.records[mi][ti] = std::move(rec);
        }
    };

    if (width <= 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(width);
        for (std::size_t w = 0; w < width; ++w) pool.emplace_back(work);
        for (std::thread& t : pool) t.join();
    }

    result.summaries.reserve(n_methods);
    for (std::size_t mi = 0; mi < n_methods; ++mi)
        result.summaries.push_back(summarize(spec.methods[mi].label,
                                             result.records[mi],
                                             result.oracle_loss, spec.oracle.tol));
    return result;
}

std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0.0 ? "inf" : "-inf";
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

void emit(const ExperimentResult& result, const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw std::runtime_error("cannot create output directory " + dir +
                                     ": " + ec.message());

    std::string summary = "method,min,q1,median,q3,max,mean,oracle_frac,diverged,mean_wall_ms\n";
    for (const SummaryRow& row : result.summaries) {
        summary += row.method;
        summary += ',';
        summary += format_double(row.min);
        summary += ',';
        summary += format_double(row.q1);
        summary += ',';
        summary += format_double(row.median);
        summary += ',';
        summary += format_double(row.q3);
        summary += ',';
        summary += format_double(row.max);
        summary += ',';
        summary += format_double(row.mean);
        summary += ',';
        summary += format_double(row.oracle_frac);
        summary += ',';
        summary += std::to_string(row.diverged);
        summary += ',';
        summary += format_double(row.mean_wall_ms);
        summary += '\n';
    }
    write_file(fs::path(dir) / "summary.csv", summary);

    std::string trials = "method,trial,seed,final_loss,diverged,wall_ms\n";
    for (std::size_t mi = 0; mi < result.records.size(); ++mi) {
        const auto& recs = result.records[mi];
        for (std::size_t ti = 0; ti < recs.size(); ++ti) {
            const TrialRecord& r = recs[ti];
            trials += r.method;
            trials += ',';
            trials += std::to_string(ti);
            trials += ',';
            trials += std::to_string(r.seed);
            trials += ',';
            trials += format_double(r.final_loss);
            trials += ',';
            trials += r.diverged ? '1' : '0';
            trials += ',';
            trials += format_double(r.wall_ms);
            trials += '\n';
        }
    }
    write_file(fs::path(dir) / "trials.csv", trials);

    for (std::size_t mi = 0; mi < result.records.size(); ++mi) {
        const auto& recs = result.records[mi];
        std::size_t count = std::min(result.spec.traj_trials, recs.size());
        for (std::size_t ti = 0; ti < count; ++ti) {
            const TrialRecord& r = recs[ti];
            std::string body = "step,sum_loss,keep_fraction\n";
            std::size_t ki = 0;
            double kv = 1.0;
            for (std::size_t step = 0; step < r.trajectory.size(); ++step) {
                while (ki < r.keep_steps.size() && r.keep_steps[ki] <= step) {
                    kv = r.keep_values[ki];
                    ++ki;
                }
                body += std::to_string(step);
                body += ',';
                body += format_double(r.trajectory[step]);
                body += ',';
                body += format_double(kv);
                body += '\n';
            }
            std::string name = "traj_" + sanitize_label(r.method) + "_" +
                               std::to_string(ti) + ".csv";
            write_file(fs::path(dir) / name, body);
        }
    }

    ExperimentSpec resolved = result.spec;
    resolved.out_dir = dir;
    write_file(fs::path(dir) / "spec.resolved.json", resolved_json(resolved));
}

} // namespace multigrad
