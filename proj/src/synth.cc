#include "pose3r/synth.h"

#include "pose3r/geometry.h"
#include "pose3r/least_squares.h"

#include <Eigen/Geometry>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <numeric>
#include <thread>

namespace pose3r {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

constexpr double kDeg = M_PI / 180.0;

Vec3 image_of(const Pose &P, const Vec3 &x) { return P.apply(x); }

} // namespace

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
    std::uint64_t h = splitmix64(seed);
    h = splitmix64(h ^ splitmix64(a + 0x1234567ull));
    h = splitmix64(h ^ splitmix64(b + 0x7654321ull));
    return h;
}

Mat3 random_rotation(std::mt19937_64 &rng) {
    std::uniform_real_distribution<double> full(0.0, 360.0), half(0.0, 180.0);
    for (;;) {
        const double a = full(rng), b = half(rng), g = full(rng);
        const Mat3 R = (Eigen::AngleAxisd(a * kDeg, Vec3::UnitZ()) * Eigen::AngleAxisd(b * kDeg, Vec3::UnitY()) *
                        Eigen::AngleAxisd(g * kDeg, Vec3::UnitX()))
                           .toRotationMatrix();
        // stay clear of the CGR singularity
        if (Eigen::AngleAxisd(R).angle() <= 179.0 * kDeg)
            return R;
    }
}

Vec3 random_in_sphere(std::mt19937_64 &rng, double radius) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (;;) {
        const Vec3 v(u(rng), u(rng), u(rng));
        if (v.squaredNorm() <= 1.0)
            return radius * v;
    }
}

Vec3 random_unit(std::mt19937_64 &rng) {
    std::normal_distribution<double> g;
    for (;;) {
        const Vec3 v(g(rng), g(rng), g(rng));
        const double n = v.norm();
        if (n > 1e-6)
            return v / n;
    }
}

std::vector<EffectiveSplit> effective_splits(int N) {
    std::vector<EffectiveSplit> out;
    for (int np = 0; 3 * np <= N; ++np)
        for (int nl = 0; 3 * np + 2 * nl <= N; ++nl)
            out.push_back({N - 3 * np - 2 * nl, nl, np});
    return out;
}

EffectiveSplit random_effective_split(int N, std::mt19937_64 &rng) {
    if (N < 6)
        throw Error(ErrorCode::kInvalidInput, "effective correspondence count must be at least 6");
    const std::vector<EffectiveSplit> all = effective_splits(N);
    std::uniform_int_distribution<size_t> u(0, all.size() - 1);
    return all[u(rng)];
}

EffectiveSplit random_effective_split(int N, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    return random_effective_split(N, rng);
}

SynthProblem generate(const SynthSpec &spec_in) {
    SynthSpec spec = spec_in;
    if (spec.effective_n > 0) {
        const EffectiveSplit s = random_effective_split(spec.effective_n, derive_seed(spec.seed, 3));
        spec.n_pl = s.n_pl, spec.n_l = s.n_l, spec.n_p = s.n_p;
    }
    if (spec.n_p < 0 || spec.n_l < 0 || spec.n_pl < 0 || spec.n_pl + 2 * spec.n_l + 3 * spec.n_p < 6)
        throw Error(ErrorCode::kInvalidInput, "synthetic spec needs at least 6 effective correspondences");
    if (!(spec.noise_sigma >= 0.0))
        throw Error(ErrorCode::kInvalidInput, "noise sigma must be nonnegative");

    std::mt19937_64 rng(derive_seed(spec.seed, 1));
    std::mt19937_64 noise_rng(derive_seed(spec.seed, 2));
    std::normal_distribution<double> z;
    // returns Vec3 by value; an auto expression here would dangle
    auto noise = [&]() -> Vec3 {
        Vec3 e;
        for (int k = 0; k < 3; ++k)
            e(k) = z(noise_rng);
        return spec.noise_sigma * e;
    };

    SynthProblem out;
    std::uniform_real_distribution<double> ut(-spec.translation_range, spec.translation_range);
    out.truth.R = random_rotation(rng);
    out.truth.t = Vec3(ut(rng), ut(rng), ut(rng));
    out.planted = {out.truth};

    const double r = spec.sphere_radius;
    for (int i = 0; i < spec.n_pl; ++i) {
        const Vec3 x = random_in_sphere(rng, r);
        const Vec3 n = random_unit(rng);
        const Vec3 p = out.truth.apply(x);
        Vec3 off = random_in_sphere(rng, r);
        off -= n * n.dot(off);
        out.corrs.planes.emplace_back(x + noise(), n, p + off);
    }
    std::uniform_real_distribution<double> ul(-r, r);
    for (int i = 0; i < spec.n_l; ++i) {
        const Vec3 x = random_in_sphere(rng, r);
        const Vec3 d = random_unit(rng);
        out.corrs.lines.emplace_back(x + noise(), d, out.truth.apply(x) + d * ul(rng));
    }
    for (int i = 0; i < spec.n_p; ++i) {
        const Vec3 x = random_in_sphere(rng, r);
        out.corrs.points.push_back({x + noise(), out.truth.apply(x)});
    }
    return out;
}

std::vector<PointToLine> make_ambiguous_lines(const std::vector<Vec3> &points, const Pose &P1, const Pose &P2) {
    std::vector<PointToLine> out;
    for (const Vec3 &x : points) {
        const Vec3 y1 = image_of(P1, x), y2 = image_of(P2, x);
        const double gap = (y1 - y2).norm();
        if (!(gap > 1e-9))
            throw Error(ErrorCode::kDegenerateFixture, "both poses map a point to the same image");
        out.emplace_back(x, (y1 - y2) / gap, y1);
    }
    return out;
}

std::vector<PointToPlane> make_ambiguous_planes(const std::vector<Vec3> &points, const Pose &P1, const Pose &P2,
                                                const Pose &P3) {
    std::vector<PointToPlane> out;
    for (const Vec3 &x : points) {
        const Vec3 y1 = image_of(P1, x), y2 = image_of(P2, x), y3 = image_of(P3, x);
        const Vec3 n = (y2 - y1).cross(y3 - y1);
        const double scale = (y2 - y1).norm() * (y3 - y1).norm();
        if (!(n.norm() > 1e-9 * std::max(scale, 1e-300)) || !(scale > 1e-18))
            throw Error(ErrorCode::kDegenerateFixture, "images of a point are collinear; the plane is not unique");
        out.emplace_back(x, n.normalized(), y1);
    }
    return out;
}

CorrespondenceSet make_ambiguous_mixed(const std::vector<Vec3> &line_points, const std::vector<Vec3> &plane_points,
                                       const Pose &P1, const Pose &P2) {
    CorrespondenceSet out;
    out.lines = make_ambiguous_lines(line_points, P1, P2);
    for (const Vec3 &x : plane_points) {
        const Vec3 y1 = image_of(P1, x), y2 = image_of(P2, x);
        const double gap = (y1 - y2).norm();
        if (!(gap > 1e-9))
            throw Error(ErrorCode::kDegenerateFixture, "both poses map a point to the same image");
        const Vec3 d = (y1 - y2) / gap;
        // any plane through the line y1-y2 works; take the axis least aligned with it
        int k = 0;
        for (int i = 1; i < 3; ++i)
            if (std::abs(d(i)) < std::abs(d(k)))
                k = i;
        out.planes.emplace_back(x, d.cross(Vec3::Unit(k)).normalized(), y1);
    }
    return out;
}

AmbiguityKind parse_ambiguity(const std::string &name) {
    if (name == "lines")
        return AmbiguityKind::kLines;
    if (name == "planes")
        return AmbiguityKind::kPlanes;
    if (name == "mixed")
        return AmbiguityKind::kMixed;
    throw Error(ErrorCode::kInvalidInput, "unknown ambiguity type '" + name + "' (lines, planes, mixed)");
}

SynthProblem make_ambiguity_fixture(AmbiguityKind kind, std::uint64_t seed) {
    std::mt19937_64 rng(derive_seed(seed, 4));
    std::uniform_real_distribution<double> ut(-10.0, 10.0);
    auto pose = [&] { return Pose(random_rotation(rng), Vec3(ut(rng), ut(rng), ut(rng))); };
    auto pts = [&](int n) {
        std::vector<Vec3> v;
        for (int i = 0; i < n; ++i)
            v.push_back(random_in_sphere(rng, 10.0));
        return v;
    };
    SynthProblem out;
    const Pose P1 = pose(), P2 = pose();
    switch (kind) {
    case AmbiguityKind::kLines:
        out.corrs.lines = make_ambiguous_lines(pts(5), P1, P2);
        out.planted = {P1, P2};
        break;
    case AmbiguityKind::kPlanes: {
        const Pose P3 = pose();
        out.corrs.planes = make_ambiguous_planes(pts(10), P1, P2, P3);
        out.planted = {P1, P2, P3};
        break;
    }
    case AmbiguityKind::kMixed: {
        const std::vector<Vec3> lp = pts(3), pp = pts(4);
        out.corrs = make_ambiguous_mixed(lp, pp, P1, P2);
        out.planted = {P1, P2};
        break;
    }
    }
    out.truth = out.planted.front();
    return out;
}

int worker_threads() {
    int n = static_cast<int>(std::thread::hardware_concurrency());
    if (const char *env = std::getenv("POSE3R_THREADS")) {
        const int v = std::atoi(env);
        if (v > 0)
            n = v;
    }
    return std::max(1, n);
}

std::vector<BenchTrial> run_cell(const BenchCell &cell, int trials, std::uint64_t seed) {
    std::vector<BenchTrial> out(std::max(0, trials));
    if (trials <= 0)
        return out;
    const SynthSpec &s = cell.spec;
    const std::uint64_t key = derive_seed(static_cast<std::uint64_t>(s.effective_n),
                                          static_cast<std::uint64_t>(s.n_p * 1000003 + s.n_l * 1009 + s.n_pl));
    std::atomic<int> next{0};
    auto work = [&] {
        for (int k = next++; k < trials; k = next++) {
            SynthSpec spec = s;
            spec.seed = derive_seed(seed, key, static_cast<std::uint64_t>(k));
            BenchTrial &tr = out[k];
            try {
                const SynthProblem prob = generate(spec);
                const auto t0 = std::chrono::steady_clock::now();
                const LeastSquaresReport rep = solve_least_squares(prob.corrs);
                tr.time_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
                tr.rot_err = rotation_error_deg(rep.best().pose.R, prob.truth.R);
                tr.trans_err = translation_error_rel(rep.best().pose.t, prob.truth.t);
            } catch (const Error &) {
                tr.failed = true;
            }
        }
    };
    const int nt = std::min(worker_threads(), trials);
    std::vector<std::thread> pool;
    for (int i = 1; i < nt; ++i)
        pool.emplace_back(work);
    work();
    for (auto &th : pool)
        th.join();
    return out;
}

double median(std::vector<double> v) {
    if (v.empty())
        return std::nan("");
    std::sort(v.begin(), v.end());
    const size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

namespace {

std::vector<double> ranks(const std::vector<double> &v) {
    std::vector<size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](size_t a, size_t b) { return v[a] < v[b]; });
    std::vector<double> r(v.size());
    for (size_t i = 0; i < idx.size();) {
        size_t j = i;
        while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]])
            ++j;
        const double avg = 0.5 * (i + j) + 1.0;
        for (size_t k = i; k <= j; ++k)
            r[idx[k]] = avg;
        i = j + 1;
    }
    return r;
}

} // namespace

double spearman(const std::vector<double> &x, const std::vector<double> &y) {
    if (x.size() != y.size() || x.size() < 2)
        return std::nan("");
    const std::vector<double> rx = ranks(x), ry = ranks(y);
    const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / rx.size();
    const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / ry.size();
    double sxy = 0, sxx = 0, syy = 0;
    for (size_t i = 0; i < rx.size(); ++i) {
        sxy += (rx[i] - mx) * (ry[i] - my);
        sxx += (rx[i] - mx) * (rx[i] - mx);
        syy += (ry[i] - my) * (ry[i] - my);
    }
    return sxy / std::sqrt(sxx * syy);
}

std::vector<BenchRow> run_benchmark(const std::vector<BenchCell> &grid, int trials, std::uint64_t seed) {
    std::vector<BenchRow> rows;
    if (trials <= 0)
        return rows;
    for (const BenchCell &cell : grid) {
        const std::vector<BenchTrial> res = run_cell(cell, trials, seed);
        BenchRow row;
        row.label = cell.label;
        row.effective_n = cell.spec.effective_n > 0
                              ? cell.spec.effective_n
                              : cell.spec.n_pl + 2 * cell.spec.n_l + 3 * cell.spec.n_p;
        row.sigma = cell.spec.noise_sigma;
        row.trials = trials;
        std::vector<double> rot, trans;
        double tsum = 0.0;
        for (const BenchTrial &t : res) {
            if (t.failed) {
                ++row.failures;
                continue;
            }
            rot.push_back(t.rot_err);
            trans.push_back(t.trans_err);
            tsum += t.time_ms;
        }
        if (!rot.empty()) {
            row.rot_mean = std::accumulate(rot.begin(), rot.end(), 0.0) / rot.size();
            row.trans_mean = std::accumulate(trans.begin(), trans.end(), 0.0) / trans.size();
            row.rot_median = median(rot);
            row.trans_median = median(trans);
            row.time_mean_ms = tsum / rot.size();
        }
        rows.push_back(row);
    }
    return rows;
}

} // namespace pose3r
