#include "pose3r/io.h"

#include "pose3r/cgr.h"
#include "pose3r/geometry.h"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

namespace pose3r {

using nlohmann::json;

namespace {

[[noreturn]] void field_error(const std::string &path, const std::string &what) {
    throw Error(ErrorCode::kParse, "field '" + path + "': " + what);
}

const json &member(const json &obj, const std::string &key, const std::string &path) {
    if (!obj.is_object())
        field_error(path, "expected an object");
    auto it = obj.find(key);
    if (it == obj.end())
        field_error(path.empty() ? key : path + "." + key, "missing");
    return *it;
}

double number(const json &v, const std::string &path) {
    if (!v.is_number())
        field_error(path, "expected a number");
    const double d = v.get<double>();
    if (!std::isfinite(d))
        field_error(path, "non-finite number");
    return d;
}

Vec3 vec3(const json &v, const std::string &path) {
    if (!v.is_array() || v.size() != 3)
        field_error(path, "expected an array of 3 numbers");
    Vec3 out;
    for (int i = 0; i < 3; ++i)
        out(i) = number(v[i], path + "[" + std::to_string(i) + "]");
    return out;
}

Vec3 unit3(const json &v, const std::string &path) {
    const Vec3 u = vec3(v, path);
    try {
        return checked_unit(u, path.c_str());
    } catch (const Error &e) {
        field_error(path, e.what());
    }
}

json to_json(const Vec3 &v) { return json::array({v(0), v(1), v(2)}); }

json to_json(const Pose &p) {
    json R = json::array();
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c)
            R.push_back(p.R(r, c));
    return json{{"R", R}, {"t", to_json(p.t)}};
}

Pose pose_from(const json &v, const std::string &path) {
    const json &R = member(v, "R", path);
    if (!R.is_array() || R.size() != 9)
        field_error(path + ".R", "expected 9 numbers (row-major rotation)");
    Pose p;
    for (int i = 0; i < 9; ++i)
        p.R(i / 3, i % 3) = number(R[i], path + ".R[" + std::to_string(i) + "]");
    p.t = vec3(member(v, "t", path), path + ".t");
    if (!p.R.allFinite() || !p.is_valid(1e-6))
        field_error(path + ".R", "not a rotation matrix");
    return p;
}

const json *optional_array(const json &obj, const std::string &key) {
    auto it = obj.find(key);
    if (it == obj.end() || it->is_null())
        return nullptr;
    if (!it->is_array())
        field_error(key, "expected an array");
    return &*it;
}

void check_header(const json &doc, const std::string &schema, int version) {
    if (!doc.is_object())
        throw Error(ErrorCode::kParse, "top level must be an object");
    const json &s = member(doc, "schema", "");
    if (!s.is_string() || s.get<std::string>() != schema)
        field_error("schema", "expected \"" + schema + "\"");
    const json &v = member(doc, "version", "");
    if (!v.is_number_integer())
        field_error("version", "expected an integer");
    if (v.get<int>() > version || v.get<int>() < 1)
        field_error("version", "unsupported schema version " + std::to_string(v.get<int>()));
}

json parse_text(const std::string &text) {
    try {
        return json::parse(text);
    } catch (const json::parse_error &e) {
        // locate the byte offset reported by the parser
        const size_t upto = std::min<size_t>(e.byte == 0 ? 0 : e.byte - 1, text.size());
        const size_t line = 1 + std::count(text.begin(), text.begin() + upto, '\n');
        const size_t nl = text.rfind('\n', upto == 0 ? 0 : upto - 1);
        const size_t col = (nl == std::string::npos || upto == 0) ? upto + 1 : upto - nl;
        throw Error(ErrorCode::kParse,
                    "line " + std::to_string(line) + ", column " + std::to_string(col) + ": malformed JSON");
    }
}

std::string slurp(const std::string &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error(ErrorCode::kParse, "cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void spill(const std::string &path, const std::string &text) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw Error(ErrorCode::kInvalidInput, "cannot write '" + path + "'");
    out << text;
    if (!out)
        throw Error(ErrorCode::kInvalidInput, "write failed for '" + path + "'");
}

std::string index_path(const char *key, size_t i) { return std::string(key) + "[" + std::to_string(i) + "]"; }

double max_abs_residual(const CorrespondenceSet &corrs, const Pose &pose) {
    double m = 0.0;
    for (const GeneralResidual &row : to_general_rows(corrs))
        m = std::max(m, std::abs(evaluate_row(row, pose)));
    return m;
}

double first_order_norm(const CorrespondenceSet &corrs, const Pose &pose) {
    const RationalCost rc = build_rational_cost(corrs);
    RationalCost::Vec6 x;
    x << rotation_to_cgr(pose.R).s, pose.t;
    return rc.cleared_gradient(x).lpNorm<Eigen::Infinity>();
}

} // namespace

ProblemFile parse_problem(const std::string &text) {
    const json doc = parse_text(text);
    check_header(doc, "pose3r-problem", kProblemSchemaVersion);
    ProblemFile p;
    if (const json *a = optional_array(doc, "planes"))
        for (size_t i = 0; i < a->size(); ++i) {
            const std::string at = index_path("planes", i);
            const json &e = (*a)[i];
            p.corrs.planes.emplace_back(vec3(member(e, "x", at), at + ".x"), unit3(member(e, "n", at), at + ".n"),
                                        vec3(member(e, "y", at), at + ".y"));
        }
    if (const json *a = optional_array(doc, "lines"))
        for (size_t i = 0; i < a->size(); ++i) {
            const std::string at = index_path("lines", i);
            const json &e = (*a)[i];
            p.corrs.lines.emplace_back(vec3(member(e, "x", at), at + ".x"), unit3(member(e, "d", at), at + ".d"),
                                       vec3(member(e, "y", at), at + ".y"));
        }
    if (const json *a = optional_array(doc, "points"))
        for (size_t i = 0; i < a->size(); ++i) {
            const std::string at = index_path("points", i);
            const json &e = (*a)[i];
            p.corrs.points.push_back({vec3(member(e, "x", at), at + ".x"), vec3(member(e, "y", at), at + ".y")});
        }
    if (auto it = doc.find("prior"); it != doc.end() && !it->is_null())
        p.prior = pose_from(*it, "prior");
    if (auto it = doc.find("ground_truth"); it != doc.end() && !it->is_null())
        p.ground_truth = pose_from(*it, "ground_truth");
    if (const json *a = optional_array(doc, "planted"))
        for (size_t i = 0; i < a->size(); ++i)
            p.planted.push_back(pose_from((*a)[i], index_path("planted", i)));
    return p;
}

std::string format_problem(const ProblemFile &p) {
    json doc{{"schema", "pose3r-problem"}, {"version", kProblemSchemaVersion}};
    json planes = json::array(), lines = json::array(), points = json::array();
    for (const PointToPlane &c : p.corrs.planes)
        planes.push_back({{"x", to_json(c.x)}, {"n", to_json(c.n)}, {"y", to_json(c.y)}});
    for (const PointToLine &c : p.corrs.lines)
        lines.push_back({{"x", to_json(c.x)}, {"d", to_json(c.d)}, {"y", to_json(c.y)}});
    for (const PointToPoint &c : p.corrs.points)
        points.push_back({{"x", to_json(c.x)}, {"y", to_json(c.y)}});
    doc["planes"] = planes;
    doc["lines"] = lines;
    doc["points"] = points;
    if (p.prior)
        doc["prior"] = to_json(*p.prior);
    if (p.ground_truth)
        doc["ground_truth"] = to_json(*p.ground_truth);
    if (!p.planted.empty()) {
        json a = json::array();
        for (const Pose &q : p.planted)
            a.push_back(to_json(q));
        doc["planted"] = a;
    }
    return doc.dump(1) + "\n";
}

ProblemFile read_problem(const std::string &path) {
    try {
        return parse_problem(slurp(path));
    } catch (const Error &e) {
        if (e.code() == ErrorCode::kParse)
            throw Error(ErrorCode::kParse, path + ": " + e.what());
        throw;
    }
}

void write_problem(const std::string &path, const ProblemFile &p) { spill(path, format_problem(p)); }

Pose parse_pose(const std::string &text) {
    const json doc = parse_text(text);
    if (doc.is_object() && !doc.contains("R") && doc.contains("prior"))
        return pose_from(doc["prior"], "prior");
    return pose_from(doc, "pose");
}

Pose read_pose(const std::string &path) {
    try {
        return parse_pose(slurp(path));
    } catch (const Error &e) {
        if (e.code() == ErrorCode::kParse)
            throw Error(ErrorCode::kParse, path + ": " + e.what());
        throw;
    }
}

std::string format_solution(const SolutionFile &s) {
    json doc{{"schema", "pose3r-solution"}, {"version", kSolutionSchemaVersion}, {"solver", s.solver}};
    json meta{{"time_total_ms", s.time_total_ms},
              {"time_build_ms", s.time_build_ms},
              {"time_relaxation_ms", s.time_relaxation_ms},
              {"time_refine_ms", s.time_refine_ms},
              {"relaxation_roots", s.relaxation_roots},
              {"dropped_roots", s.dropped_roots},
              {"iterations", s.iterations}};
    if (!s.config_tag.empty())
        meta["config_tag"] = s.config_tag;
    doc["metadata"] = meta;
    json cands = json::array();
    for (const SolutionEntry &c : s.candidates) {
        json e = to_json(c.pose);
        e["cost"] = c.cost;
        e["grad_norm"] = c.grad_norm;
        e["converged"] = c.converged;
        e["selected"] = c.selected;
        if (c.max_residual)
            e["max_residual"] = *c.max_residual;
        cands.push_back(e);
    }
    doc["candidates"] = cands;
    if (s.inliers)
        doc["inliers"] = {{"planes", s.inliers->planes}, {"lines", s.inliers->lines}, {"points", s.inliers->points}};
    return doc.dump(1) + "\n";
}

SolutionFile parse_solution(const std::string &text) {
    const json doc = parse_text(text);
    check_header(doc, "pose3r-solution", kSolutionSchemaVersion);
    SolutionFile s;
    const json &solver = member(doc, "solver", "");
    if (!solver.is_string())
        field_error("solver", "expected a string");
    s.solver = solver.get<std::string>();
    const json &meta = member(doc, "metadata", "");
    auto num = [&](const char *k) { return number(member(meta, k, "metadata"), std::string("metadata.") + k); };
    auto integer = [&](const char *k) {
        const json &v = member(meta, k, "metadata");
        if (!v.is_number_integer())
            field_error(std::string("metadata.") + k, "expected an integer");
        return v.get<int>();
    };
    s.time_total_ms = num("time_total_ms");
    s.time_build_ms = num("time_build_ms");
    s.time_relaxation_ms = num("time_relaxation_ms");
    s.time_refine_ms = num("time_refine_ms");
    s.relaxation_roots = integer("relaxation_roots");
    s.dropped_roots = integer("dropped_roots");
    s.iterations = integer("iterations");
    if (auto it = meta.find("config_tag"); it != meta.end()) {
        if (!it->is_string())
            field_error("metadata.config_tag", "expected a string");
        s.config_tag = it->get<std::string>();
    }
    const json &cands = member(doc, "candidates", "");
    if (!cands.is_array())
        field_error("candidates", "expected an array");
    for (size_t i = 0; i < cands.size(); ++i) {
        const std::string at = index_path("candidates", i);
        const json &e = cands[i];
        SolutionEntry c;
        c.pose = pose_from(e, at);
        c.cost = number(member(e, "cost", at), at + ".cost");
        c.grad_norm = number(member(e, "grad_norm", at), at + ".grad_norm");
        const json &conv = member(e, "converged", at), &sel = member(e, "selected", at);
        if (!conv.is_boolean())
            field_error(at + ".converged", "expected a boolean");
        if (!sel.is_boolean())
            field_error(at + ".selected", "expected a boolean");
        c.converged = conv.get<bool>();
        c.selected = sel.get<bool>();
        if (auto it = e.find("max_residual"); it != e.end())
            c.max_residual = number(*it, at + ".max_residual");
        s.candidates.push_back(c);
    }
    if (auto it = doc.find("inliers"); it != doc.end()) {
        InlierMask m;
        auto flags = [&](const char *k, std::vector<bool> &out) {
            const json &a = member(*it, k, "inliers");
            if (!a.is_array())
                field_error(std::string("inliers.") + k, "expected an array");
            for (size_t i = 0; i < a.size(); ++i) {
                if (!a[i].is_boolean())
                    field_error(std::string("inliers.") + index_path(k, i), "expected a boolean");
                out.push_back(a[i].get<bool>());
            }
        };
        flags("planes", m.planes);
        flags("lines", m.lines);
        flags("points", m.points);
        s.inliers = m;
    }
    return s;
}

SolutionFile read_solution(const std::string &path) {
    try {
        return parse_solution(slurp(path));
    } catch (const Error &e) {
        if (e.code() == ErrorCode::kParse)
            throw Error(ErrorCode::kParse, path + ": " + e.what());
        throw;
    }
}

void write_solution(const std::string &path, const SolutionFile &s) { spill(path, format_solution(s)); }

SolutionFile solution_from_least_squares(const LeastSquaresReport &rep, bool keep_all) {
    SolutionFile s;
    s.solver = "least-squares";
    s.time_build_ms = rep.time_build_ms;
    s.time_relaxation_ms = rep.time_relaxation_ms;
    s.time_refine_ms = rep.time_refine_ms;
    s.time_total_ms = rep.time_build_ms + rep.time_relaxation_ms + rep.time_refine_ms;
    s.relaxation_roots = rep.relaxation_roots;
    s.dropped_roots = rep.dropped_roots;
    for (int i = 0; i < static_cast<int>(rep.candidates.size()); ++i) {
        if (!keep_all && i >= 3 && i != rep.selected)
            continue;
        const SolutionCandidate &c = rep.candidates[i];
        s.candidates.push_back({c.pose, c.cost, c.grad_norm, c.converged, i == rep.selected, std::nullopt});
    }
    return s;
}

SolutionFile solution_from_minimal(const CorrespondenceSet &corrs, const std::vector<Pose> &poses,
                                   const std::string &tag) {
    SolutionFile s;
    s.solver = "minimal";
    s.config_tag = tag;
    for (const Pose &p : poses)
        s.candidates.push_back({p, cost(corrs, p), first_order_norm(corrs, p), true, false, max_abs_residual(corrs, p)});
    std::stable_sort(s.candidates.begin(), s.candidates.end(),
                     [](const SolutionEntry &a, const SolutionEntry &b) { return a.cost < b.cost; });
    if (!s.candidates.empty())
        s.candidates.front().selected = true;
    return s;
}

SolutionFile solution_from_ransac(const CorrespondenceSet &corrs, const RansacResult &res) {
    SolutionFile s;
    s.solver = "ransac";
    s.config_tag = res.config_tag;
    s.iterations = res.iterations;
    const CorrespondenceSet in = subset(corrs, res.inliers);
    s.candidates.push_back({res.pose, cost(in, res.pose), first_order_norm(in, res.pose), res.polished, true,
                            std::nullopt});
    InlierMask m;
    size_t k = 0;
    for (size_t i = 0; i < corrs.planes.size(); ++i)
        m.planes.push_back(res.inliers.at(k++));
    for (size_t i = 0; i < corrs.lines.size(); ++i)
        m.lines.push_back(res.inliers.at(k++));
    for (size_t i = 0; i < corrs.points.size(); ++i)
        m.points.push_back(res.inliers.at(k++));
    s.inliers = m;
    return s;
}

const char *const kBenchCsvHeader =
    "label,effective_n,sigma,trials,failures,rot_err_mean_deg,rot_err_median_deg,trans_err_mean_rel,"
    "trans_err_median_rel,time_mean_ms";

std::string format_bench_csv(const std::vector<BenchRow> &rows) {
    // shortest text that reads back to the same double
    auto num = [](double v) {
        char buf[32];
        const auto res = std::to_chars(buf, buf + sizeof buf, v);
        return std::string(buf, res.ptr);
    };
    std::ostringstream out;
    out << kBenchCsvHeader << "\n";
    for (const BenchRow &r : rows)
        out << r.label << "," << r.effective_n << "," << num(r.sigma) << "," << r.trials << "," << r.failures << ","
            << num(r.rot_mean) << "," << num(r.rot_median) << "," << num(r.trans_mean) << "," << num(r.trans_median)
            << "," << num(r.time_mean_ms) << "\n";
    return out.str();
}

std::string format_svg_chart(const std::string &title, const std::string &xlabel, const std::string &ylabel,
                             const std::vector<SvgSeries> &series, bool log_y) {
    constexpr double W = 640, H = 420, L = 70, R = 160, T = 40, B = 50;
    static const char *colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf", "#8c564b"};
    auto ty = [&](double y) { return log_y ? std::log10(y) : y; };

    double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
    for (const SvgSeries &s : series)
        for (size_t i = 0; i < s.x.size(); ++i) {
            if (!std::isfinite(s.y[i]) || (log_y && s.y[i] <= 0.0))
                continue;
            x0 = std::min(x0, s.x[i]), x1 = std::max(x1, s.x[i]);
            y0 = std::min(y0, ty(s.y[i])), y1 = std::max(y1, ty(s.y[i]));
        }
    if (!std::isfinite(x0))
        x0 = 0, x1 = 1, y0 = 0, y1 = 1;
    if (x1 == x0)
        x1 = x0 + 1;
    if (y1 == y0)
        y1 = y0 + 1;
    const double pad = 0.05 * (y1 - y0);
    y0 -= pad, y1 += pad;
    auto px = [&](double x) { return L + (x - x0) / (x1 - x0) * (W - L - R); };
    auto py = [&](double y) { return H - B - (ty(y) - y0) / (y1 - y0) * (H - T - B); };

    std::ostringstream o;
    o << std::setprecision(6);
    o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n";
    o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    o << "<text x=\"" << W / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << title << "</text>\n";
    o << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B
      << "\" stroke=\"black\"/>\n";
    o << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
    for (int k = 0; k <= 4; ++k) {
        const double xv = x0 + (x1 - x0) * k / 4.0, yv = y0 + (y1 - y0) * k / 4.0;
        const double X = L + (W - L - R) * k / 4.0, Y = H - B - (H - T - B) * k / 4.0;
        o << "<text x=\"" << X << "\" y=\"" << H - B + 16 << "\" text-anchor=\"middle\" font-size=\"11\">" << xv
          << "</text>\n";
        o << "<text x=\"" << L - 6 << "\" y=\"" << Y + 4 << "\" text-anchor=\"end\" font-size=\"11\">"
          << (log_y ? "10^" : "") << (log_y ? std::round(yv * 100) / 100 : yv) << "</text>\n";
    }
    o << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 12 << "\" text-anchor=\"middle\" font-size=\"12\">"
      << xlabel << "</text>\n";
    o << "<text x=\"16\" y=\"" << (T + H - B) / 2 << "\" text-anchor=\"middle\" font-size=\"12\" transform=\"rotate(-90 16 "
      << (T + H - B) / 2 << ")\">" << ylabel << "</text>\n";
    for (size_t k = 0; k < series.size(); ++k) {
        const SvgSeries &s = series[k];
        const char *c = colors[k % 7];
        o << "<polyline fill=\"none\" stroke=\"" << c << "\" stroke-width=\"2\" points=\"";
        for (size_t i = 0; i < s.x.size(); ++i)
            if (std::isfinite(s.y[i]) && !(log_y && s.y[i] <= 0.0))
                o << px(s.x[i]) << "," << py(s.y[i]) << " ";
        o << "\"/>\n";
        o << "<text x=\"" << W - R + 10 << "\" y=\"" << T + 16 * (k + 1) << "\" font-size=\"11\" fill=\"" << c << "\">"
          << s.name << "</text>\n";
    }
    o << "</svg>\n";
    return o.str();
}

int exit_code_for(ErrorCode code) {
    switch (code) {
    case ErrorCode::kParse:
    case ErrorCode::kInvalidInput:
    case ErrorCode::kUnsupportedConfiguration:
        return 2;
    case ErrorCode::kDegenerate:
    case ErrorCode::kTranslationDegenerate:
    case ErrorCode::kSingularParameterization:
    case ErrorCode::kDegenerateMetric:
    case ErrorCode::kDegeneratePolynomial:
    case ErrorCode::kDegenerateSystem:
    case ErrorCode::kDegenerateFixture:
        return 3;
    case ErrorCode::kNoSolution:
    case ErrorCode::kNoConsensus:
        return 4;
    case ErrorCode::kNumericFailure:
        return 5;
    }
    return 5;
}

} // namespace pose3r
