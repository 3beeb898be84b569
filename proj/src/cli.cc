#include "pose3r/cli.h"

#include "pose3r/geometry.h"
#include "pose3r/io.h"
#include "pose3r/least_squares.h"
#include "pose3r/minimal.h"
#include "pose3r/ransac.h"
#include "pose3r/synth.h"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <set>

namespace pose3r {

namespace {

double ms_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

// Solution to a file, or to stdout when no path is given.
void emit_solution(const std::string &path, const SolutionFile &s, std::ostream &out) {
    if (path.empty()) {
        out << format_solution(s);
        return;
    }
    write_solution(path, s);
    const SolutionEntry *sel = nullptr;
    for (const SolutionEntry &c : s.candidates)
        if (c.selected)
            sel = &c;
    out << s.solver << ": " << s.candidates.size() << " candidate(s)";
    if (!s.config_tag.empty())
        out << ", config " << s.config_tag;
    if (sel)
        out << ", selected cost " << std::setprecision(6) << sel->cost;
    out << " -> " << path << "\n";
}

void report_truth(const ProblemFile &p, const SolutionFile &s, std::ostream &out) {
    if (!p.ground_truth)
        return;
    for (const SolutionEntry &c : s.candidates)
        if (c.selected)
            out << "vs ground truth: rotation " << std::setprecision(6)
                << rotation_error_deg(c.pose.R, p.ground_truth->R) << " deg, translation "
                << translation_error_rel(c.pose.t, p.ground_truth->t) << " (relative)\n";
}

struct Flags {
    std::string input, output, prior, csv, svg;
    bool all_minima = false;
    double threshold = 0.05, confidence = 0.99;
    int max_iterations = 1000;
    std::uint64_t seed = 0;
    int n_min = 7, n_max = 15, trials = 100;
    std::vector<double> sigmas{0.05};
    int np = -1, nl = -1, npl = -1, effective_n = 0;
    std::string ambiguous;
    double sigma = 0.0;
};

int cmd_solve_ls(const Flags &f, std::ostream &out) {
    const ProblemFile p = read_problem(f.input);
    std::optional<Pose> prior;
    if (!f.prior.empty())
        prior = read_pose(f.prior);
    const LeastSquaresReport rep = solve_least_squares(p.corrs, prior);
    const SolutionFile s = solution_from_least_squares(rep, f.all_minima);
    emit_solution(f.output, s, out);
    if (!f.output.empty())
        report_truth(p, s, out);
    return 0;
}

int cmd_solve_minimal(const Flags &f, std::ostream &out) {
    const ProblemFile p = read_problem(f.input);
    const auto t0 = std::chrono::steady_clock::now();
    MinimalDiagnostics diag;
    const std::vector<Pose> poses = solve_minimal(p.corrs, {}, &diag);
    const double ms = ms_since(t0);
    if (poses.empty())
        throw Error(ErrorCode::kNoSolution, "no real pose satisfies the minimal equations");
    SolutionFile s = solution_from_minimal(p.corrs, poses, diag.tag);
    s.time_total_ms = ms;
    emit_solution(f.output, s, out);
    if (!f.output.empty())
        report_truth(p, s, out);
    return 0;
}

int cmd_ransac(const Flags &f, std::ostream &out) {
    const ProblemFile p = read_problem(f.input);
    RansacParams params;
    params.set_threshold(f.threshold);
    params.confidence = f.confidence;
    params.seed = f.seed;
    params.max_iterations = f.max_iterations;
    params.validate();
    const auto t0 = std::chrono::steady_clock::now();
    const RansacResult res = ransac_estimate(p.corrs, params);
    SolutionFile s = solution_from_ransac(p.corrs, res);
    s.time_total_ms = ms_since(t0);
    emit_solution(f.output, s, out);
    if (!f.output.empty()) {
        int n = 0;
        for (bool b : res.inliers)
            n += b;
        out << "inliers " << n << "/" << res.inliers.size() << " after " << res.iterations << " iterations\n";
        report_truth(p, s, out);
    }
    return 0;
}

void write_text(const std::string &path, const std::string &text) {
    std::ofstream o(path, std::ios::binary);
    if (!o || !(o << text))
        throw Error(ErrorCode::kInvalidInput, "cannot write '" + path + "'");
}

void write_charts(const std::string &dir, const std::vector<BenchRow> &rows) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec)
        throw Error(ErrorCode::kInvalidInput, "cannot create '" + dir + "': " + ec.message());
    std::set<double> sigmas;
    std::set<int> ns;
    for (const BenchRow &r : rows)
        sigmas.insert(r.sigma), ns.insert(r.effective_n);

    auto by_n = [&](double BenchRow::*field) {
        std::vector<SvgSeries> out;
        for (double s : sigmas) {
            SvgSeries ser;
            std::ostringstream name;
            name << "sigma " << s;
            ser.name = name.str();
            for (const BenchRow &r : rows)
                if (r.sigma == s)
                    ser.x.push_back(r.effective_n), ser.y.push_back(r.*field);
            out.push_back(ser);
        }
        return out;
    };
    namespace fs = std::filesystem;
    write_text((fs::path(dir) / "rotation_vs_n.svg").string(),
               format_svg_chart("Median rotation error", "N", "degrees", by_n(&BenchRow::rot_median), true));
    write_text((fs::path(dir) / "translation_vs_n.svg").string(),
               format_svg_chart("Median translation error", "N", "relative", by_n(&BenchRow::trans_median), true));
    write_text((fs::path(dir) / "time_vs_n.svg").string(),
               format_svg_chart("Mean solve time", "N", "ms", by_n(&BenchRow::time_mean_ms), false));
    if (sigmas.size() > 1) {
        std::vector<SvgSeries> rot, tr;
        for (int n : ns) {
            SvgSeries a, b;
            a.name = b.name = "N " + std::to_string(n);
            for (const BenchRow &r : rows)
                if (r.effective_n == n) {
                    a.x.push_back(r.sigma), a.y.push_back(r.rot_median);
                    b.x.push_back(r.sigma), b.y.push_back(r.trans_median);
                }
            rot.push_back(a), tr.push_back(b);
        }
        write_text((fs::path(dir) / "rotation_vs_sigma.svg").string(),
                   format_svg_chart("Median rotation error", "noise sigma (m)", "degrees", rot, true));
        write_text((fs::path(dir) / "translation_vs_sigma.svg").string(),
                   format_svg_chart("Median translation error", "noise sigma (m)", "relative", tr, true));
    }
}

int cmd_bench(const Flags &f, std::ostream &out) {
    if (f.n_min < 7 || f.n_max < f.n_min)
        throw Error(ErrorCode::kInvalidInput, "need 7 <= n-min <= n-max");
    if (f.trials < 0)
        throw Error(ErrorCode::kInvalidInput, "trials must be nonnegative");
    std::vector<BenchCell> grid;
    for (double s : f.sigmas) {
        if (!(s >= 0.0))
            throw Error(ErrorCode::kInvalidInput, "sigma must be nonnegative");
        for (int n = f.n_min; n <= f.n_max; ++n) {
            BenchCell c;
            std::ostringstream label;
            label << "N" << n << "_s" << s;
            c.label = label.str();
            c.spec.effective_n = n;
            c.spec.noise_sigma = s;
            grid.push_back(c);
        }
    }
    const std::vector<BenchRow> rows = run_benchmark(grid, f.trials, f.seed);
    write_text(f.csv, format_bench_csv(rows));
    if (!f.svg.empty() && !rows.empty())
        write_charts(f.svg, rows);
    out << rows.size() << " row(s) -> " << f.csv << "\n";
    return 0;
}

int cmd_gen(const Flags &f, std::ostream &out) {
    ProblemFile p;
    const bool counts = f.np >= 0 || f.nl >= 0 || f.npl >= 0;
    const int modes = int(counts) + int(f.effective_n > 0) + int(!f.ambiguous.empty());
    if (modes != 1)
        throw Error(ErrorCode::kInvalidInput, "give exactly one of --np/--nl/--npl, --effective-n or --ambiguous");
    if (!f.ambiguous.empty()) {
        const SynthProblem sp = make_ambiguity_fixture(parse_ambiguity(f.ambiguous), f.seed);
        p.corrs = sp.corrs;
        p.ground_truth = sp.truth;
        p.planted = sp.planted;
    } else {
        SynthSpec spec;
        spec.n_p = std::max(f.np, 0);
        spec.n_l = std::max(f.nl, 0);
        spec.n_pl = std::max(f.npl, 0);
        spec.effective_n = f.effective_n;
        spec.noise_sigma = f.sigma;
        spec.seed = f.seed;
        const SynthProblem sp = generate(spec);
        p.corrs = sp.corrs;
        p.ground_truth = sp.truth;
    }
    if (f.output.empty())
        out << format_problem(p);
    else {
        write_problem(f.output, p);
        out << "N = " << p.corrs.effective_count() << " (" << p.corrs.planes.size() << " planes, "
            << p.corrs.lines.size() << " lines, " << p.corrs.points.size() << " points) -> " << f.output << "\n";
    }
    return 0;
}

void print_error(std::ostream &err, const char *kind, const std::string &msg) {
    err << nlohmann::json{{"error", kind}, {"message", msg}}.dump() << "\n";
}

} // namespace

int run_cli(const std::vector<std::string> &args, std::ostream &out, std::ostream &err) {
    CLI::App app{"Rigid pose from point-to-plane, point-to-line and point-to-point correspondences", "pose3r"};
    app.require_subcommand(1);
    Flags f;

    auto *ls = app.add_subcommand("solve-ls", "least-squares pose with all local minima");
    ls->add_option("--input", f.input, "problem file")->required();
    ls->add_option("--output", f.output, "solution file (stdout when omitted)");
    ls->add_option("--prior", f.prior, "pose file used to pick among near-equal minima");
    ls->add_flag("--all-minima", f.all_minima, "keep every candidate instead of the best three");

    auto *mn = app.add_subcommand("solve-minimal", "all poses of a minimal correspondence set");
    mn->add_option("--input", f.input, "problem file")->required();
    mn->add_option("--output", f.output, "solution file (stdout when omitted)");

    auto *rs = app.add_subcommand("ransac", "robust estimate with inlier mask");
    rs->add_option("--input", f.input, "problem file")->required();
    rs->add_option("--output", f.output, "solution file (stdout when omitted)");
    rs->add_option("--threshold", f.threshold, "inlier threshold in meters")->capture_default_str();
    rs->add_option("--seed", f.seed, "random seed")->capture_default_str();
    rs->add_option("--confidence", f.confidence, "early-exit confidence")->capture_default_str();
    rs->add_option("--max-iterations", f.max_iterations, "iteration cap")->capture_default_str();

    auto *bn = app.add_subcommand("bench", "synthetic accuracy/timing grid");
    bn->add_option("--n-min", f.n_min, "smallest effective N")->capture_default_str();
    bn->add_option("--n-max", f.n_max, "largest effective N")->capture_default_str();
    bn->add_option("--sigma", f.sigmas, "noise levels in meters (repeatable)")->delimiter(',')->capture_default_str();
    bn->add_option("--trials", f.trials, "trials per cell")->capture_default_str();
    bn->add_option("--seed", f.seed, "random seed")->capture_default_str();
    bn->add_option("--csv", f.csv, "output table")->required();
    bn->add_option("--svg", f.svg, "directory for line charts");

    auto *gn = app.add_subcommand("gen", "write a synthetic problem file");
    gn->add_option("--np", f.np, "point-to-point count");
    gn->add_option("--nl", f.nl, "point-to-line count");
    gn->add_option("--npl", f.npl, "point-to-plane count");
    gn->add_option("--effective-n", f.effective_n, "random mixture with this effective N");
    gn->add_option("--ambiguous", f.ambiguous, "exact multi-solution fixture")
        ->check(CLI::IsMember({"lines", "planes", "mixed"}));
    gn->add_option("--sigma", f.sigma, "noise on frame-1 points (m)")->capture_default_str();
    gn->add_option("--seed", f.seed, "random seed")->capture_default_str();
    gn->add_option("--output", f.output, "problem file (stdout when omitted)");

    std::vector<std::string> rev(args.rbegin(), args.rend());
    try {
        app.parse(rev);
    } catch (const CLI::ParseError &e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? 0 : 2;
    }

    try {
        if (ls->parsed())
            return cmd_solve_ls(f, out);
        if (mn->parsed())
            return cmd_solve_minimal(f, out);
        if (rs->parsed())
            return cmd_ransac(f, out);
        if (bn->parsed())
            return cmd_bench(f, out);
        if (gn->parsed())
            return cmd_gen(f, out);
    } catch (const Error &e) {
        print_error(err, error_code_name(e.code()), e.what());
        return exit_code_for(e.code());
    } catch (const std::exception &e) {
        print_error(err, "internal", e.what());
        return 5;
    }
    return 2;
}

int run_cli(int argc, char **argv) {
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i)
        args.emplace_back(argv[i]);
    return run_cli(args, std::cout, std::cerr);
}

} // namespace pose3r
