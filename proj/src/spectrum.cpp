#include "doa/spectrum.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace doa {

namespace {

constexpr double kPi = std::numbers::pi;

// g(phi) = |a^H nhat|^2 and its first two derivatives. Writing the spectrum
// through g avoids the |.| kink at zeros.
struct GEval {
    double g, g1, g2;
    cplx w;
};

GEval eval_g(const SteeringModel& model, const CVector& nhat, double phi) {
    const int m = model.m();
    cplx w = 0.0, wd = 0.0, wc = 0.0;
    for (int k = 0; k < m; ++k) {
        // conj(a_k) * nhat_k and the d/c analogues, accumulated directly
        const cplx e = std::polar(1.0, -k * phi);
        const cplx t = e * nhat[k];
        w += t;
        wd += cplx(0.0, -double(k)) * t;          // conj(jk e^{jk phi}) nhat_k
        wc += -double(k) * double(k) * t;
    }
    GEval out;
    out.w = w;
    out.g = std::norm(w);
    out.g1 = 2.0 * (wd * std::conj(w)).real();
    out.g2 = 2.0 * ((wc * std::conj(w)).real() + std::norm(wd));
    return out;
}

// Safeguarded Newton on g'(phi) = 0 inside the bracket (lo, hi), started at
// mid. The bracket comes from three consecutive scan points with the middle
// one highest, so it contains at least one local max of g.
PeakResult refine_peak(const SteeringModel& model, const CVector& nhat, double lo, double mid,
                       double hi, double g_mid, const SpectrumOptions& opts) {
    double best_phi = mid;
    double best_g = g_mid;
    double a = lo, b = hi;
    double x = mid;
    for (int it = 0; it < opts.max_refine_iter && (b - a) > opts.interval_tol; ++it) {
        const GEval e = eval_g(model, nhat, x);
        if (e.g > best_g) {
            best_g = e.g;
            best_phi = x;
        }
        // shrink the bracket using the slope sign
        if (e.g1 > 0.0) a = x; else b = x;
        double xn;
        if (e.g2 < 0.0) {
            xn = x - e.g1 / e.g2;
            if (!(xn > a && xn < b)) xn = 0.5 * (a + b);
        } else {
            xn = 0.5 * (a + b);
        }
        if (xn == x) break;
        x = xn;
    }
    const GEval fin = eval_g(model, nhat, x);
    if (fin.g > best_g) {
        best_g = fin.g;
        best_phi = x;
    }
    PeakResult r;
    r.phi = wrap_angle(best_phi);
    r.p = std::sqrt(best_g);
    r.is_local_max = true;
    return r;
}

bool inside_guard(double phi, const std::vector<double>& exclusions, double guard) {
    for (double e : exclusions) {
        if (circ_dist(phi, e) <= guard) return true;
    }
    return false;
}

}  // namespace

cplx correlation(const SteeringModel& model, const CVector& nhat, double phi) {
    cplx w = 0.0;
    for (int k = 0; k < model.m(); ++k) {
        w += std::polar(1.0, -k * phi) * nhat[k];
    }
    return w;
}

std::vector<PeakResult> local_maxima(const SteeringModel& model, const CVector& nhat,
                                     const std::vector<double>& exclusions, double guard,
                                     const SpectrumOptions& opts) {
    const int m = model.m();
    const int n = opts.scan_density * m;
    std::vector<double> g(n);
    std::vector<double> phi(n);
    double gmax = 0.0;
    for (int i = 0; i < n; ++i) {
        phi[i] = -kPi + 2.0 * kPi * double(i) / double(n);
        g[i] = eval_g(model, nhat, phi[i]).g;
        gmax = std::max(gmax, g[i]);
    }
    std::vector<PeakResult> out;
    if (gmax <= 0.0) return out;  // flat zero spectrum: ties everywhere
    for (int i = 0; i < n; ++i) {
        const int prev = (i + n - 1) % n;
        const int next = (i + 1) % n;
        if (g[i] >= g[prev] && g[i] > g[next]) {
            const double lo = phi[i] - 2.0 * kPi / double(n);
            const double hi = phi[i] + 2.0 * kPi / double(n);
            PeakResult r = refine_peak(model, nhat, lo, phi[i], hi, g[i], opts);
            if (!inside_guard(r.phi, exclusions, guard)) out.push_back(r);
        }
    }
    std::stable_sort(out.begin(), out.end(),
                     [](const PeakResult& a, const PeakResult& b) { return a.p > b.p; });
    return out;
}

std::optional<PeakResult> global_peak(const SteeringModel& model, const CVector& nhat,
                                      const std::vector<double>& exclusions, double guard,
                                      const SpectrumOptions& opts) {
    auto peaks = local_maxima(model, nhat, exclusions, guard, opts);
    if (peaks.empty()) return std::nullopt;
    return peaks.front();
}

std::pair<int, double> grid_peak(const SteeringModel& model, const CVector& nhat,
                                 const std::vector<double>& grid,
                                 const std::vector<int>& exclude) {
    int best = -1;
    double best_v = -1.0;
    for (int i = 0; i < static_cast<int>(grid.size()); ++i) {
        if (std::find(exclude.begin(), exclude.end(), i) != exclude.end()) continue;
        const double v = std::abs(correlation(model, nhat, grid[i]));
        if (v > best_v) {
            best_v = v;
            best = i;
        }
    }
    return {best, best_v};
}

}  // namespace doa
