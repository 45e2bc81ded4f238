#include "gasketlab/io.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

using namespace gasket;
using nlohmann::json;

namespace {

constexpr int kOk = 0;
constexpr int kNoConvergence = 1;
constexpr int kUsage = 2;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct RunConfig {
    std::string fractal = "sg";
    std::string word;
    int vertex = 0;
    int k = -1;
    int kmax = -1;
    double tol = 1e-5;
    int depth = -1;
    std::string format = "csv";
    std::string out;
    std::string cache;
    unsigned threads = 1;
    // command specific
    int type = 0;
    int grid = 8;
    std::vector<double> c;
    std::string u = "green";
    std::vector<double> h{1, 0, 0};
    bool series = false;
};

struct Context {
    PcfDescriptor desc;
    std::unique_ptr<Fractal> frac;
    HarmonicStructure hs;

    explicit Context(const std::string& name)
    {
        try {
            desc = resolve_descriptor(name);
            frac = std::make_unique<Fractal>(desc);
        } catch (const std::invalid_argument& e) {
            throw UsageError(e.what());
        }
        hs = make_harmonic_structure(*frac);
    }
};

struct Result {
    std::string text;
    int code = kOk;
};

// Items are dealt round-robin to workers, each owning an integrator; results
// land in their own slot so the output order never depends on scheduling.
template <class T, class Fn>
std::vector<T> parallel_map(const HarmonicStructure& hs, std::size_t n, unsigned threads, Fn fn)
{
    std::vector<T> out(n);
    std::vector<std::exception_ptr> errs(n);
    const unsigned workers = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(n, 1))));
    auto run = [&](unsigned t) {
        CutIntegrator cut(hs);
        for (std::size_t i = t; i < n; i += workers) {
            try {
                out[i] = fn(cut, i);
            } catch (...) {
                errs[i] = std::current_exception();
            }
        }
    };
    if (workers == 1) {
        run(0);
    } else {
        std::vector<std::thread> pool;
        for (unsigned t = 0; t < workers; ++t)
            pool.emplace_back(run, t);
        for (auto& th : pool)
            th.join();
    }
    for (auto& e : errs)
        if (e)
            std::rethrow_exception(e);
    return out;
}

std::string hex64(std::uint64_t v)
{
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

std::uint64_t fnv1a(std::string_view s)
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return h;
}

Address parse_point(const Fractal& f, const RunConfig& rc)
{
    if (rc.vertex < 0 || rc.vertex > 2)
        throw UsageError("--vertex must be 0, 1 or 2");
    try {
        return f.canonical(f.address(rc.word, rc.vertex));
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }
}

Triple triple_of(const std::vector<double>& v, const char* flag)
{
    if (v.size() != 3)
        throw UsageError(std::string(flag) + " needs three comma-separated values");
    return {v[0], v[1], v[2]};
}

void require_sg(const Context& ctx, const char* cmd)
{
    if (ctx.frac->n_maps() != 3 || ctx.desc.name != "sg")
        throw UsageError(std::string(cmd) + " is only available for sg");
}

// --- commands ---------------------------------------------------------------

Result cmd_info(const RunConfig& rc)
{
    Context ctx(rc.fractal);
    const Fractal& f = *ctx.frac;
    std::ostringstream os;
    const auto mesh1 = mesh_for(f, 1);
    if (rc.format == "json") {
        json j;
        j["name"] = f.name();
        j["N"] = f.n_maps();
        j["r"] = ctx.hs.r;
        j["mu"] = ctx.desc.measure_weights;
        j["types"] = f.neighborhood_type_count();
        j["V1"] = mesh1->size();
        os << j.dump() << '\n';
    } else {
        os << "name," << f.name() << '\n';
        os << "N," << f.n_maps() << '\n';
        os << "r," << fmt(ctx.hs.r) << '\n';
        os << "mu," << fmt(ctx.desc.measure_weights[0]) << '\n';
        os << "types," << f.neighborhood_type_count() << '\n';
        os << "V1," << mesh1->size() << '\n';
    }
    return {os.str(), kOk};
}

Result cmd_tmap(const RunConfig& rc)
{
    Context ctx(rc.fractal);
    if (rc.type < 0 || rc.type >= ctx.frac->neighborhood_type_count())
        throw UsageError("--type must be below " + std::to_string(ctx.frac->neighborhood_type_count()));
    std::vector<Triple> points;
    if (!rc.c.empty()) {
        points.push_back(triple_of(rc.c, "--c"));
    } else {
        if (rc.grid < 1)
            throw UsageError("--grid must be positive");
        // B*: one coordinate zero; rows with an earlier zero index are skipped,
        // as are rows cutting at a nonjunction vertex.
        const Valence l = ctx.frac->valence(ctx.frac->neighborhood_type_representative(rc.type));
        for (int z = 0; z < 3; ++z) {
            const int i1 = z == 0 ? 1 : 0, i2 = z == 2 ? 1 : 2;
            for (int g1 = 0; g1 <= rc.grid; ++g1)
                for (int g2 = 0; g2 <= rc.grid; ++g2) {
                    Triple c{};
                    c[static_cast<std::size_t>(i1)] = static_cast<double>(g1) / rc.grid;
                    c[static_cast<std::size_t>(i2)] = static_cast<double>(g2) / rc.grid;
                    bool dup = false;
                    for (int e = 0; e < z; ++e)
                        dup = dup || c[static_cast<std::size_t>(e)] == 0.0;
                    for (std::size_t e = 0; e < 3; ++e)
                        dup = dup || (l[e] == 0 && c[e] != 0.0);
                    if (!dup)
                        points.push_back(c);
                }
        }
    }
    struct Row {
        ITriple a;
        bool ok = true;
    };
    const auto rows = parallel_map<Row>(ctx.hs, points.size(), rc.threads, [&](CutIntegrator& cut, std::size_t i) {
        Row r;
        r.a = tmap(cut, rc.type, points[i], rc.tol, &r.ok);
        return r;
    });
    std::ostringstream os;
    bool all_ok = true;
    json arr = json::array();
    if (rc.format == "csv")
        os << "c0,c1,c2,a0,a1,a2,width\n";
    for (std::size_t i = 0; i < points.size(); ++i) {
        const auto& a = rows[i].a;
        const double width = std::max({a[0].width(), a[1].width(), a[2].width()});
        all_ok = all_ok && rows[i].ok && width <= rc.tol;
        if (rc.format == "csv") {
            os << fmt(points[i][0]) << ',' << fmt(points[i][1]) << ',' << fmt(points[i][2]);
            for (const auto& x : a)
                os << ',' << fmt(x.mid());
            os << ',' << fmt(width) << '\n';
        } else {
            json j;
            j["c"] = points[i];
            j["lo"] = {a[0].lo, a[1].lo, a[2].lo};
            j["hi"] = {a[0].hi, a[1].hi, a[2].hi};
            j["width"] = width;
            arr.push_back(j);
        }
    }
    if (rc.format == "json")
        os << arr.dump() << '\n';
    if (!all_ok)
        std::cerr << "tmap: some enclosures are wider than --tol\n";
    return {os.str(), all_ok ? kOk : kNoConvergence};
}

struct SolveRow {
    int k = 0;
    std::optional<MeanValueNeighborhood> mvn;
    std::optional<IntervalValue> cb;
    std::optional<IntervalValue> cb_series;
    std::string error;
    double best = 0.0;
};

// series_depth < 0 means k + 10.
std::vector<SolveRow> solve_range(const Context& ctx, const RunConfig& rc, const Address& x, bool with_cb, bool series,
                                  int series_depth)
{
    const Fractal& f = *ctx.frac;
    const int kmin = std::max(rc.k < 0 ? first_level(f, x) : rc.k, first_level(f, x));
    const int kmax = rc.kmax < 0 ? kmin : rc.kmax;
    if (kmax < kmin)
        throw UsageError("--kmax is below the first admissible level " + std::to_string(kmin));
    const std::size_t n = static_cast<std::size_t>(kmax - kmin + 1);
    return parallel_map<SolveRow>(ctx.hs, n, rc.threads, [&](CutIntegrator& cut, std::size_t i) {
        SolveRow r;
        r.k = kmin + static_cast<int>(i);
        try {
            r.mvn = solve_mvn(cut, x, *base_cell_at(f, x, r.k), rc.tol);
            if (with_cb) {
                r.cb = cb_constant(cut, *r.mvn, x);
                if (series)
                    r.cb_series = cb_constant_series(cut, *r.mvn, x, series_depth < 0 ? r.k + 10 : std::max(series_depth, r.k + 6));
            }
        } catch (const MeanValueError& e) {
            r.error = e.what();
            r.best = e.best_residual;
        }
        return r;
    });
}

Result cmd_solve(const RunConfig& rc)
{
    Context ctx(rc.fractal);
    const Address x = parse_point(*ctx.frac, rc);
    const auto rows = solve_range(ctx, rc, x, false, false, -1);
    std::ostringstream os;
    bool ok = true;
    if (rc.format == "csv")
        os << "k,cell,case,method,c0,c1,c2,a0,a1,a2,residual,converged\n";
    for (const auto& r : rows) {
        if (!r.mvn) {
            ok = false;
            std::cerr << r.error << " (k=" << r.k << ", best residual " << fmt(r.best) << ")\n";
            continue;
        }
        const auto& m = *r.mvn;
        ok = ok && m.converged;
        if (!m.converged)
            std::cerr << "solve: residual " << fmt(m.residual) << " above tol at k=" << r.k << '\n';
        if (rc.format == "csv") {
            os << r.k << ',' << m.spec.base_cell.word << ',' << static_cast<int>(m.solve_case) << ',' << m.method;
            for (double v : m.spec.c)
                os << ',' << fmt(v);
            for (double v : m.target)
                os << ',' << fmt(v);
            os << ',' << fmt(m.residual) << ',' << (m.converged ? 1 : 0) << '\n';
        } else {
            os << mvn_json(ctx.frac->name(), x, m, std::nullopt) << '\n';
        }
    }
    return {os.str(), ok ? kOk : kNoConvergence};
}

Result cmd_cb(const RunConfig& rc)
{
    Context ctx(rc.fractal);
    require_sg(ctx, "cb");
    const Address x = parse_point(*ctx.frac, rc);
    const auto rows = solve_range(ctx, rc, x, true, rc.series, rc.depth);
    std::ostringstream os;
    bool ok = true;
    if (rc.format == "csv")
        os << "k,cell,c0,c1,c2,cb_lo,cb_hi,band_lo,band_hi,in_band" << (rc.series ? ",series_lo,series_hi" : "") << '\n';
    for (const auto& r : rows) {
        if (!r.mvn) {
            ok = false;
            std::cerr << r.error << " (k=" << r.k << ")\n";
            continue;
        }
        const auto& m = *r.mvn;
        ok = ok && m.converged;
        const auto band = cb_band(r.k);
        const bool in_band = r.cb->lo >= band.first && r.cb->hi <= band.second;
        if (rc.format == "csv") {
            os << r.k << ',' << m.spec.base_cell.word;
            for (double v : m.spec.c)
                os << ',' << fmt(v);
            os << ',' << fmt(r.cb->lo) << ',' << fmt(r.cb->hi) << ',' << fmt(band.first) << ',' << fmt(band.second) << ','
               << (in_band ? 1 : 0);
            if (r.cb_series)
                os << ',' << fmt(r.cb_series->lo) << ',' << fmt(r.cb_series->hi);
            os << '\n';
        } else {
            auto j = json::parse(mvn_json(ctx.frac->name(), x, m, r.cb));
            j["band"] = {band.first, band.second};
            j["in_band"] = in_band;
            if (r.cb_series)
                j["cb_series"] = {{"lo", r.cb_series->lo}, {"hi", r.cb_series->hi}};
            os << j.dump() << '\n';
        }
    }
    return {os.str(), ok ? kOk : kNoConvergence};
}

Result cmd_converge(const RunConfig& rc)
{
    Context ctx(rc.fractal);
    require_sg(ctx, "converge");
    const Address x = parse_point(*ctx.frac, rc);
    TestFunction kind;
    if (rc.u == "harmonic")
        kind = TestFunction::harmonic;
    else if (rc.u == "v")
        kind = TestFunction::v;
    else if (rc.u == "green")
        kind = TestFunction::green_of_harmonic;
    else
        throw UsageError("--u must be harmonic, v or green");
    const Triple h = triple_of(rc.h, "--boundary");
    const int kmin = rc.k < 0 ? 2 : rc.k;
    const int kmax = rc.kmax < 0 ? kmin : rc.kmax;
    const int M = rc.depth < 0 ? kmax + 4 : rc.depth;
    if (M < kmax + 2)
        throw UsageError("--depth must be at least kmax + 2");
    CutIntegrator cut(ctx.hs);
    std::vector<ConvergenceRow> rows;
    try {
        rows = convergence_experiment(cut, kind, h, x, kmin, kmax, M, rc.tol);
    } catch (const MeanValueError& e) {
        std::cerr << e.what() << " (best residual " << fmt(e.best_residual) << ")\n";
        return {"", kNoConvergence};
    }
    std::ostringstream os;
    json arr = json::array();
    if (rc.format == "csv")
        os << "k,cell,cb_lo,cb_hi,num_lo,num_hi,ratio_lo,ratio_hi,expected,error\n";
    for (const auto& r : rows) {
        const double err = std::abs(r.ratio.mid() - r.expected);
        if (rc.format == "csv") {
            os << r.k << ',' << r.spec.base_cell.word << ',' << fmt(r.cb.lo) << ',' << fmt(r.cb.hi) << ','
               << fmt(r.numerator.lo) << ',' << fmt(r.numerator.hi) << ',' << fmt(r.ratio.lo) << ',' << fmt(r.ratio.hi)
               << ',' << fmt(r.expected) << ',' << fmt(err) << '\n';
        } else {
            arr.push_back({{"k", r.k},
                           {"cell", r.spec.base_cell.word},
                           {"c", r.spec.c},
                           {"cb", {r.cb.lo, r.cb.hi}},
                           {"numerator", {r.numerator.lo, r.numerator.hi}},
                           {"ratio", {r.ratio.lo, r.ratio.hi}},
                           {"expected", r.expected},
                           {"error", err}});
        }
    }
    if (rc.format == "json")
        os << arr.dump() << '\n';
    return {os.str(), kOk};
}

// --- cache ------------------------------------------------------------------

std::string config_key(const std::string& cmd, const RunConfig& rc)
{
    json j;
    j["cmd"] = cmd;
    try {
        j["descriptor"] = json::parse(descriptor_json(resolve_descriptor(rc.fractal)));
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }
    j["word"] = rc.word;
    j["vertex"] = rc.vertex;
    j["k"] = rc.k;
    j["kmax"] = rc.kmax;
    j["tol"] = rc.tol;
    j["depth"] = rc.depth;
    j["format"] = rc.format;
    j["type"] = rc.type;
    j["grid"] = rc.grid;
    j["c"] = rc.c;
    j["u"] = rc.u;
    j["h"] = rc.h;
    j["series"] = rc.series;
    return j.dump();
}

json load_cache(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        return json::object();
    try {
        json j = json::parse(in);
        return j.is_object() ? j : json::object();
    } catch (const json::exception&) {
        std::cerr << "cache: ignoring unreadable file '" << path << "'\n";
        return json::object();
    }
}

Result run_cached(const std::string& cmd, const RunConfig& rc, Result (*fn)(const RunConfig&))
{
    std::string path = rc.cache;
    if (const char* env = std::getenv("GASKETLAB_CACHE"); env && *env)
        path = env;
    if (path.empty())
        return fn(rc);
    const std::string key = config_key(cmd, rc);
    const std::string hash = hex64(fnv1a(key));
    json cache = load_cache(path);
    if (cache.contains(hash) && cache[hash].value("config", "") == key)
        return {cache[hash].at("output").get<std::string>(), kOk};
    Result r = fn(rc);
    if (r.code == kOk) {
        cache[hash] = {{"config", key}, {"output", r.text}};
        std::ofstream outf(path, std::ios::trunc);
        if (outf)
            outf << cache.dump(1) << '\n';
        else
            std::cerr << "cache: cannot write '" << path << "'\n";
    }
    return r;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Mean value neighborhoods and Laplacians on p.c.f. gaskets"};
    app.require_subcommand(1);
    RunConfig rc;

    auto common = [&](CLI::App* sub, bool point) {
        sub->add_option("--fractal", rc.fractal, "sg | hexagasket | sg3 | descriptor.json");
        sub->add_option("--tol", rc.tol, "tolerance")->check(CLI::PositiveNumber);
        sub->add_option("--format", rc.format, "csv | json")->check(CLI::IsMember({"csv", "json"}));
        sub->add_option("--out", rc.out, "output file (default stdout)");
        sub->add_option("--cache", rc.cache, "result cache file");
        sub->add_option("--threads", rc.threads, "worker threads")->check(CLI::Range(1u, 256u));
        if (point) {
            sub->add_option("--word", rc.word, "digit string of the point's address");
            sub->add_option("--vertex", rc.vertex, "boundary label 0, 1 or 2");
            sub->add_option("--k", rc.k, "(first) level");
            sub->add_option("--kmax", rc.kmax, "last level");
            sub->add_option("--depth", rc.depth, "sampling / series depth");
        }
    };

    auto* info = app.add_subcommand("info", "descriptor summary");
    info->add_option("name", rc.fractal, "fractal name or descriptor path");
    common(info, false);

    auto* tm = app.add_subcommand("tmap", "T(c) over a grid on B*, or at --c");
    common(tm, false);
    tm->add_option("--type", rc.type, "neighborhood type");
    tm->add_option("--grid", rc.grid, "grid intervals per axis");
    tm->add_option("--c", rc.c, "single point c0,c1,c2")->delimiter(',');

    auto* sv = app.add_subcommand("solve", "mean value neighborhood at a point");
    common(sv, true);

    auto* cb = app.add_subcommand("cb", "c_B intervals and the band check (sg)");
    common(cb, true);
    cb->add_flag("--series", rc.series, "also sum the phi series to --depth");

    auto* cv = app.add_subcommand("converge", "(M_B(u) - u(x)) / c_B against the Laplacian (sg)");
    common(cv, true);
    cv->add_option("--u", rc.u, "harmonic | v | green");
    cv->add_option("--boundary", rc.h, "boundary values of h")->delimiter(',');

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kUsage;
    }

    Result res;
    try {
        if (*info)
            res = run_cached("info", rc, cmd_info);
        else if (*tm)
            res = run_cached("tmap", rc, cmd_tmap);
        else if (*sv)
            res = run_cached("solve", rc, cmd_solve);
        else if (*cb)
            res = run_cached("cb", rc, cmd_cb);
        else
            res = run_cached("converge", rc, cmd_converge);
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kUsage;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kNoConvergence;
    }

    if (rc.out.empty()) {
        std::cout << res.text;
    } else {
        std::ofstream outf(rc.out, std::ios::trunc);
        if (!outf) {
            std::cerr << "error: cannot write '" << rc.out << "'\n";
            return kUsage;
        }
        outf << res.text;
    }
    return res.code;
}
