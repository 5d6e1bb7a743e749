#pragma once

// Evaluation of the explicit constant chains: the stability envelopes, the
// eps -> sigma -> eps4 -> eps0 -> eps1 -> gamma -> eps2 -> j0 -> j1 -> delta
// forward chain, the log log(1/delta) rate inversion, and the appendix
// order-of-magnitude table.
//
// The chain produces quantities of the order exp(-exp(exp(v))) with v ~ 1e5,
// so plain doubles are useless past the second step.  Everything here runs on
// ExtReal, a positive number represented through the sign and nested-log
// magnitude of its natural logarithm.  Magnitudes below 1e15 at their own
// nesting depth are exact doubles, which makes products, powers, exp and log
// exact in the (log, log-log, ...) domain; additions across widely separated
// scales saturate to the dominant term, which is below double resolution
// anyway.

#include "specrec/common.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>
#include <string>
#include <vector>

namespace specrec {

// ---------------------------------------------------------------------------
// Tower: magnitude m >= 0 stored as m = exp^(level)(v).
// Canonical form: level == 0, v in [0, kTowerCap], or level >= 1 and
// v > ln(kTowerCap) (so ordering by level is strict).
// ---------------------------------------------------------------------------
inline constexpr double kTowerCap = 1e15;

struct Tower {
    int level = 0;
    double v = 0.0;

    static Tower from_value(double x) {
        require(x >= 0.0 && std::isfinite(x), "Tower: negative or non-finite value");
        Tower t{0, x};
        t.normalize();
        return t;
    }

    void normalize() {
        while (v > kTowerCap) {
            v = std::log(v);
            ++level;
        }
        while (level > 0 && v <= std::log(kTowerCap)) {
            v = std::exp(v);
            --level;
        }
    }

    bool is_zero() const { return level == 0 && v == 0.0; }

    // ln(m) for m >= 1; caller guarantees m >= 1.
    Tower log_down() const {
        if (level == 0) {
            require(v >= 1.0, "Tower::log_down on value < 1");
            return from_value(std::log(v));
        }
        Tower t{level - 1, v};
        t.normalize();
        return t;
    }

    Tower exp_up() const {
        if (level == 0 && v <= std::log(kTowerCap)) return from_value(std::exp(v));
        Tower t{level + 1, v};
        t.normalize();
        return t;
    }

    double as_double() const {  // +inf if too large
        double x = v;
        for (int i = 0; i < level; ++i) {
            if (x > 709.0) return std::numeric_limits<double>::infinity();
            x = std::exp(x);
        }
        return x;
    }

    static int cmp(const Tower& a, const Tower& b) {
        if (a.level != b.level) return a.level < b.level ? -1 : 1;
        if (a.v == b.v) return 0;
        return a.v < b.v ? -1 : 1;
    }

    // a + b, dominant-term saturation beyond double resolution at depth.
    static Tower add(const Tower& a, const Tower& b) {
        if (a.is_zero()) return b;
        if (b.is_zero()) return a;
        if (a.level == 0 && b.level == 0) return from_value(a.v + b.v);
        const Tower& big = cmp(a, b) >= 0 ? a : b;
        const Tower& sml = cmp(a, b) >= 0 ? b : a;
        // ln(big + sml) = ln(big) + log1p(sml/big)
        double lr = log_ratio(sml, big);  // ln(sml/big) <= 0
        Tower lb = big.log_down();
        if (lr < -700.0) return big;
        return exp_of_sum(lb, std::log1p(std::exp(lr)));
    }

    // a - b for a >= b; saturates to a when b is below resolution.
    static Tower sub(const Tower& a, const Tower& b) {
        require(cmp(a, b) >= 0, "Tower::sub would go negative");
        if (b.is_zero()) return a;
        if (a.level == 0 && b.level == 0) return from_value(a.v - b.v);
        if (cmp(a, b) == 0) return Tower{0, 0.0};
        double lr = log_ratio(b, a);
        Tower la = a.log_down();
        if (lr < -700.0) return a;
        return exp_of_sum(la, std::log1p(-std::exp(lr)));
    }

    // m * c for c > 0: ln(m*c) = ln m + ln c.
    static Tower scale(const Tower& a, double c) {
        require(c > 0.0 && std::isfinite(c), "Tower::scale needs finite c > 0");
        if (a.is_zero()) return a;
        if (a.level == 0) {
            if (a.v <= 1e300 / c) return from_value(a.v * c);
            return exp_of_sum(from_value(std::log(a.v)), std::log(c));
        }
        Tower la = a.log_down();
        return exp_of_sum(la, std::log(c));
    }

private:
    // ln(a/b) as double for towers a <= b (result <= 0), -inf when lost.
    static double log_ratio(const Tower& a, const Tower& b) {
        Tower la = a.level == 0 && a.v < 1.0 ? Tower{0, 0.0} : a.log_down();
        Tower lb = b.log_down();
        if (a.level == 0 && a.v < 1.0) {
            // ln a negative; representable iff lb is plain
            if (lb.level == 0 && a.v > 0.0) return std::log(a.v) - lb.v;
            return -std::numeric_limits<double>::infinity();
        }
        if (la.level == 0 && lb.level == 0) return la.v - lb.v;
        if (Tower::cmp(la, lb) == 0) return 0.0;
        return -std::numeric_limits<double>::infinity();
    }

    // exp(L + d) where L is a tower (the ln of something) and d a small double.
    static Tower exp_of_sum(const Tower& L, double d) {
        if (L.level == 0) {
            Tower t{0, L.v + d};
            return t.exp_up();
        }
        // d is below resolution of a level>=1 exponent
        return Tower{L.level, L.v}.exp_up();
    }

    friend struct ExtReal;
};

// ---------------------------------------------------------------------------
// ExtReal: x >= 0 with x = exp(sign * mag), mag a Tower.  sign=+1 for x >= 1.
// ---------------------------------------------------------------------------
struct ExtReal {
    bool zero = true;
    int sign = 1;  // sign of ln x
    Tower mag{};   // |ln x|

    ExtReal() = default;

    static ExtReal from_double(double x) {
        require(x >= 0.0 && !std::isnan(x), "ExtReal: negative or NaN");
        ExtReal r;
        if (x == 0.0) return r;
        r.zero = false;
        double lx = std::log(x);
        r.sign = lx >= 0.0 ? 1 : -1;
        r.mag = Tower::from_value(std::fabs(lx));
        return r;
    }

    static ExtReal one() { return from_double(1.0); }

    /// x = exp(s * m): build from an explicit log-magnitude.
    static ExtReal from_log(int s, const Tower& m) {
        ExtReal r;
        r.zero = false;
        r.sign = m.is_zero() ? 1 : s;
        r.mag = m;
        return r;
    }

    static ExtReal from_log(double ln_x) {
        return from_log(ln_x >= 0 ? 1 : -1, Tower::from_value(std::fabs(ln_x)));
    }

    /// The extended real whose *value* equals the tower t (t >= 0).
    static ExtReal from_tower_value(const Tower& t) {
        if (t.is_zero()) return ExtReal();
        if (t.level == 0) return from_double(t.v);
        return from_log(1, t.log_down());
    }

    bool is_zero() const { return zero; }

    double to_double() const {  // saturates to 0 / +inf outside double range
        if (zero) return 0.0;
        double m = mag.as_double();
        if (std::isinf(m)) return sign > 0 ? m : 0.0;
        double lx = sign * m;
        if (lx > 709.0) return std::numeric_limits<double>::infinity();
        if (lx < -745.0) return 0.0;
        return std::exp(lx);
    }

    /// ln(x) as (sign, Tower) pair; precondition x > 0.
    std::pair<int, Tower> log_pair() const {
        require(!zero, "ExtReal::log of zero");
        return {sign, mag};
    }

    /// ln ln (1/x) for x < 1 small: used for the rate inversion.
    Tower loglog_inv() const {
        require(!zero && sign < 0, "ExtReal::loglog_inv needs x < 1");
        return mag.log_down();
    }

    static int cmp(const ExtReal& a, const ExtReal& b) {
        if (a.zero && b.zero) return 0;
        if (a.zero) return -1;
        if (b.zero) return 1;
        if (a.sign != b.sign) return a.sign < b.sign ? -1 : 1;
        int c = Tower::cmp(a.mag, b.mag);
        return a.sign > 0 ? c : -c;
    }

    friend bool operator<=(const ExtReal& a, const ExtReal& b) { return cmp(a, b) <= 0; }
    friend bool operator<(const ExtReal& a, const ExtReal& b) { return cmp(a, b) < 0; }

    friend ExtReal operator*(const ExtReal& a, const ExtReal& b) {
        if (a.zero || b.zero) return ExtReal();
        return from_signed_sum(a.sign, a.mag, b.sign, b.mag);
    }

    friend ExtReal operator/(const ExtReal& a, const ExtReal& b) {
        require(!b.zero, "ExtReal: division by zero");
        if (a.zero) return ExtReal();
        return from_signed_sum(a.sign, a.mag, -b.sign, b.mag);
    }

    /// x^p for real p (p may be negative).
    ExtReal pow(double p) const {
        if (zero) {
            require(p > 0.0, "ExtReal: 0^nonpositive");
            return ExtReal();
        }
        if (p == 0.0) return one();
        int s = p > 0 ? sign : -sign;
        return from_log(s, Tower::scale(mag, std::fabs(p)));
    }

    /// exp(s*x) where x = *this >= 0 and s = +-1.
    static ExtReal exp_of(const ExtReal& x, int s = 1) {
        if (x.zero) return one();
        Tower value_tower;
        if (x.sign < 0) {
            value_tower = Tower::from_value(x.to_double());  // x < 1: plain
        } else {
            value_tower = x.mag.exp_up();
        }
        return from_log(s, value_tower);
    }

    /// x + y for nonnegative x, y.
    friend ExtReal operator+(const ExtReal& a, const ExtReal& b) {
        if (a.zero) return b;
        if (b.zero) return a;
        const ExtReal& big = cmp(a, b) >= 0 ? a : b;
        const ExtReal& sml = cmp(a, b) >= 0 ? b : a;
        // ln(big + sml) = ln big + log1p(sml/big)
        double lr = (sml / big).signed_log_double();
        if (lr < -700.0) return big;
        double corr = std::log1p(std::exp(lr));
        // add corr to ln(big)
        Tower lb = big.mag;
        if (big.sign > 0) {
            if (lb.level == 0)
                return from_log(1, Tower::from_value(lb.v + corr));
            return big;  // below resolution
        }
        if (lb.level == 0) {
            double nl = -lb.v + corr;
            return from_log(nl >= 0 ? 1 : -1, Tower::from_value(std::fabs(nl)));
        }
        return big;
    }

    /// signed ln x as plain double (+-inf when beyond level 0).
    double signed_log_double() const {
        if (zero) return -std::numeric_limits<double>::infinity();
        if (mag.level == 0) return sign * mag.v;
        return sign * std::numeric_limits<double>::infinity();
    }

    std::string str() const {
        std::ostringstream os;
        double d = to_double();
        if (d != 0.0 && std::isfinite(d) && (zero || mag.level == 0)) {
            os << d;
            return os.str();
        }
        if (zero) return "0";
        os << "exp(" << (sign < 0 ? "-" : "");
        for (int i = 0; i < mag.level; ++i) os << "exp(";
        os << mag.v;
        for (int i = 0; i < mag.level + 1; ++i) os << ")";
        return os.str();
    }

private:
    static ExtReal from_signed_sum(int sa, const Tower& ma, int sb, const Tower& mb) {
        if (sa == sb) return from_log(sa, Tower::add(ma, mb));
        int c = Tower::cmp(ma, mb);
        if (c == 0) return one();
        if (c > 0) return from_log(sa, Tower::sub(ma, mb));
        return from_log(sb, Tower::sub(mb, ma));
    }
};

// ---------------------------------------------------------------------------
// Constant table and derived values
// ---------------------------------------------------------------------------

/// Uniform constants whose existence the theory asserts but whose value is
/// free; all default to 1 and are configurable.  Derived constants are
/// computed from these by the displayed formulas.
struct ChainConstants {
    double C6 = 1.0;    // ball volume comparability
    double C7 = 1.0;    // Weyl two-sided constant
    double C9 = 1.0;    // bi-Lipschitz constant of the distance map H
    double C11 = 1.0;   // net cardinality constant
    double C12 = 1.0;   // envelope prefactor
    double C18 = 1.0;   // eigenvalue-shift comparability
    double C23 = 1.0;   // approximate-distance error constant
    double C24 = 1.0;   // delta <= C24*sigma requirement
    double C30 = 1.0;   // near-field boundary extension constant
    double C32 = 1.0;   // boundary-distance reconstruction constant
    double c1_s = 1.0;  // annulus cut-off constant c1(s)
    double c3_s = 1.0;  // cut-off Sobolev growth constant c3(s)
    double c205 = 1.0;  // unique-continuation geometric prefactor
    double Cvol = 0.5;  // the (0,1) constant linking eps0 to eps4
    double D = 1.0;     // diameter bound
    double r0 = 1.0;    // data ball radius
};

inline double b_exponent(int n, double s) {
    return (n <= 3) ? 0.5 : s / double(n);
}

inline double c200_of(int n) { return 58.0 * (n + 1) + 1.0; }

struct ChainInput {
    double epsilon = 1e-2;  // target GH accuracy
    int n = 2;
    double s = 1.75;        // Sobolev exponent in (3/2, 2)
    double theta = 0.5;     // in [1/2, 1]
    double Lambda_s = 1.0;  // >= 1
    int L = 4;              // coordinate-point count
    ChainConstants c;

    void validate() const {
        require(epsilon > 0.0 && epsilon < 1.0, "chain: epsilon must be in (0,1)");
        require(n >= 2, "chain: n >= 2");
        require(s > 1.5 && s < 2.0, "chain: s in (3/2, 2)");
        require(theta >= 0.5 && theta <= 1.0, "chain: theta in [1/2, 1]");
        require(Lambda_s >= 1.0, "chain: Lambda_s >= 1");
        require(L >= 1, "chain: L >= 1");
    }
};

struct AuditEntry {
    std::string name;
    std::string detail;
    bool holds = false;
};

struct ChainOutput {
    // chain quantities (log-domain capable)
    ExtReal sigma, eps4, eps0, eps1, gamma, eps2, j0, j1, delta;
    ExtReal delta_headline;  // exp(-exp(S eps1^{-C43})), the Theorem-1 form
    ExtReal J_lo, J_hi;      // admissible eigenvalue-count window
    ExtReal delta_star;      // the a-priori smallness threshold
    std::map<std::string, double> constants;   // plain-double derived constants
    std::map<std::string, std::string> big;    // ExtReal-valued constants, printed
    ExtReal C1, C35, C36, C39, C40, C42;       // rate constants (can exceed double range)
    double C2 = 0.0, C34 = 0.0, C37 = 0.0, C38 = 0.0, C43 = 0.0;
    std::vector<AuditEntry> audit;
    bool all_hold = true;
    bool delta_underflows_double = true;

    void check(const std::string& name, bool holds, const std::string& detail) {
        audit.push_back({name, detail, holds});
        all_hold = all_hold && holds;
    }
};

// f_theta(a, b) = a * (ln(1 + a/b))^{-theta}; increasing in a and in b.
inline double f_theta(double a, double b, double theta) {
    require(a > 0.0 && b > 0.0, "f_theta: positive arguments");
    return a * std::pow(std::log1p(a / b), -theta);
}

struct Envelopes {
    ExtReal E1, E2;
    ExtReal c202, c206;
};

/// Stability envelopes E1 (forward loss per cylinder) and E2 (the inverse
/// envelope used to pick eps2), plus their gamma-exploding prefactors.
/// Evaluated in the log domain; `eps2_or_eps1` is E1's eps2 argument and
/// E2's eps1/(4L) argument respectively.
inline Envelopes stability_envelopes(int n, double s, double theta, const ExtReal& gamma,
                                     double Lambda, const ExtReal& eps2_or_eps1, int L,
                                     const ChainConstants& c) {
    const double beta = theta * theta / 2.0;
    const double c200 = c200_of(n);
    const ExtReal Lam = ExtReal::from_double(Lambda);
    const ExtReal C12 = ExtReal::from_double(c.C12);

    // c206 = c205 exp(gamma^{-c200}), c202 = C12 exp(gamma^{-c200 theta/2})
    ExtReal g_pow = gamma.pow(-c200);
    ExtReal c206 = ExtReal::from_double(c.c205) * ExtReal::exp_of(g_pow, 1);
    ExtReal c202 = C12 * ExtReal::exp_of(gamma.pow(-c200 * theta / 2.0), 1);

    // E1(eps2; theta, gamma, Lambda) =
    //   c202 * Lambda / (gamma^{2-theta/2} * ln(1 + gamma Lambda^{(s-1)/s} eps2^{-(s-1)/s})^beta)
    const double q = (s - 1.0) / s;
    ExtReal X = gamma * Lam.pow(q) * eps2_or_eps1.pow(-q);
    // ln(1+X): X is typically astronomically large or tiny; handle both.
    ExtReal lnX;
    double xd = X.to_double();
    if (xd != 0.0 && std::isfinite(xd) && xd < 1e300) {
        lnX = ExtReal::from_double(std::log1p(xd));
    } else if (xd == 0.0) {
        lnX = X;  // ln(1+X) = X to below double-log resolution
    } else {
        auto [sg, m] = X.log_pair();
        require(sg > 0, "E1: ln(1+X) lost precision");
        lnX = ExtReal::from_tower_value(m);  // ln(1+X) ~ ln X = m
    }
    ExtReal E1 = c202 * Lam / (gamma.pow(2.0 - theta / 2.0) * lnX.pow(beta));

    // E2(eps1/(4L); theta, gamma, Lambda) =
    //   Lambda gamma^{s/(s-1)} exp(-(s/(s-1)) * A),
    //   A = (Lambda 4L eps1^{-1} gamma^{-(2-theta/2)} C12 exp(gamma^{-c200}))^{1/beta}
    ExtReal base = Lam * ExtReal::from_double(4.0 * L) * eps2_or_eps1.pow(-1.0) *
                   gamma.pow(-(2.0 - theta / 2.0)) * C12 * ExtReal::exp_of(g_pow, 1);
    ExtReal A = base.pow(1.0 / beta);
    ExtReal E2 = Lam * gamma.pow(s / (s - 1.0)) * ExtReal::exp_of(A, -1).pow(s / (s - 1.0));
    return Envelopes{E1, E2, c202, c206};
}

struct Thresholds {
    ExtReal j0_hat;
    ExtReal delta0_hat;
    ExtReal j1_lo, j1_hi;
    ExtReal J_lo, J_hi;
    double C16 = 0.0, c5 = 0.0;
};

/// j0_hat(eps2/8; gamma, Lambda_s), the j1 window, delta0_hat (at the top of
/// the j1 window) and the derived constants C16 and c5.
inline Thresholds thresholds(int n, double s, const ExtReal& eps2, const ExtReal& gamma,
                             double Lambda, int L, const ChainConstants& c) {
    Thresholds t;
    const double C20 = 6.0 * std::sqrt(1.0 + c.D * c.D);
    t.C16 = std::pow(c.c3_s, double(n) / s) * std::pow(c.C7, n / 2.0) *
            std::pow(C20 + 1.0, double(n) / s);
    t.c5 = std::min(1.0 / c.C7,
                    std::pow(1.0 + c.C18, -0.5) / (100.0 * std::pow(1.0 + c.D, 1.5) * L));
    ExtReal Lam = ExtReal::from_double(Lambda);
    ExtReal eps_star = eps2 / ExtReal::from_double(8.0);
    t.j0_hat = ExtReal::from_double(t.C16) * gamma.pow(-double(n)) *
               (Lam / eps_star).pow(double(n) / s);
    double winf = std::pow(2.0, n / 2.0) * std::pow(c.C7, double(n));
    t.j1_lo = t.j0_hat;
    t.j1_hi = t.j0_hat * ExtReal::from_double(winf);
    t.delta0_hat = ExtReal::from_double(t.c5) * eps2 / (t.j1_hi * Lam);
    return t;
}

/// eps(delta) = C1 (ln ln (1/delta))^{-C2}; domain delta <= exp(-e).
inline ExtReal invert_rate(const ExtReal& delta, const ExtReal& C1, double C2) {
    require(!delta.is_zero(), "invert_rate: delta > 0 required");
    require(ExtReal::cmp(delta, ExtReal::from_double(std::exp(-std::exp(1.0)))) <= 0,
            "invert_rate: delta must be <= exp(-e)");
    Tower LL = delta.loglog_inv();  // ln ln (1/delta) >= 1
    ExtReal LLr = ExtReal::from_tower_value(LL);
    return C1 * LLr.pow(-C2);
}

/// Forward chain: from target GH accuracy eps down to the permissible data
/// error delta, with an audit trail of every inequality along the way.
inline ChainOutput forward_chain(const ChainInput& in) {
    in.validate();
    ChainOutput out;
    const ChainConstants& c = in.c;
    const int n = in.n;
    const double s = in.s, theta = in.theta, Lam = in.Lambda_s;
    const int L = in.L;
    const double beta = theta * theta / 2.0;
    const double bs = b_exponent(n, s);
    const double c200 = c200_of(n);

    // derived plain constants
    const double C20 = 6.0 * std::sqrt(1.0 + c.D * c.D);
    const double C25 = 4.0 * c.C9 * std::sqrt(double(L)) + 3.0;
    const double C26 = C25 + 2.0;
    const double C27 = 2.0 * c.C23 + 2.0 * C26 + 1.0;
    const double C29 = 2.0 * C27 + 2.0 * c.C23 + 1.0;
    const double C33 = (2.0 * c.C32 + 1.0) * std::pow(C29, 1.0 / 36.0);
    const double C28 = std::pow(2.0 * L * c.c1_s, -1.0 / (2.0 * bs));
    const double C41 = std::min(C28, c.r0 / 32.0);
    const double C16 = std::pow(c.c3_s, double(n) / s) * std::pow(c.C7, n / 2.0) *
                       std::pow(C20 + 1.0, double(n) / s);
    const double c5 = std::min(1.0 / c.C7,
                               std::pow(1.0 + c.C18, -0.5) / (100.0 * std::pow(1.0 + c.D, 1.5) * L));

    out.constants = {{"beta", beta},   {"b_s", bs},   {"c200", c200}, {"C20", C20},
                     {"C25", C25},     {"C26", C26},  {"C27", C27},   {"C29", C29},
                     {"C33", C33},     {"C28", C28},  {"C41", C41},   {"C16", C16},
                     {"c5", c5},       {"Cvol", c.Cvol}};

    const ExtReal eps = ExtReal::from_double(in.epsilon);

    // sigma = (eps / C33)^36
    out.sigma = (eps / ExtReal::from_double(C33)).pow(36.0);

    // eps4 = sigma^n / (4 C6); eps0 = Cvol * eps4 (and must stay <= 1/10)
    out.eps4 = out.sigma.pow(double(n)) / ExtReal::from_double(4.0 * c.C6);
    out.eps0 = ExtReal::from_double(c.Cvol) * out.eps4;
    out.check("eps0 <= 1/10", ExtReal::cmp(out.eps0, ExtReal::from_double(0.1)) <= 0,
              "eps0=" + out.eps0.str());
    out.check("eps0 <= Lambda_s/10",
              ExtReal::cmp(out.eps0, ExtReal::from_double(Lam / 10.0)) <= 0, "");

    // eps1 = eps0^2 / (10 Lambda_s); C40 closed form cross-check
    out.eps1 = out.eps0.pow(2.0) / ExtReal::from_double(10.0 * Lam);
    out.C40 = ExtReal::from_double(c.Cvol * c.Cvol / (160.0 * c.C6 * c.C6)) /
              ExtReal::from_double(C33).pow(72.0 * n);
    {
        ExtReal eps1_closed = out.C40 * eps.pow(72.0 * n) / ExtReal::from_double(Lam);
        double la = out.eps1.signed_log_double(), lb = eps1_closed.signed_log_double();
        out.check("eps1 closed form", std::fabs(la - lb) <= 1e-9 * std::max(1.0, std::fabs(la)),
                  "ln eps1=" + std::to_string(la));
    }

    // gamma = C41 * eps1^{1/b(s)}; must satisfy gamma <= gamma0 and <= r0/32
    out.gamma = ExtReal::from_double(C41) * out.eps1.pow(1.0 / bs);
    {
        ExtReal gamma0 = ExtReal::from_double(C28) * (out.eps1 / ExtReal::from_double(Lam)).pow(1.0 / bs);
        out.check("gamma <= gamma0(eps0; s, Lambda_s)", out.gamma <= gamma0, "");
        out.check("gamma <= r0/32",
                  ExtReal::cmp(out.gamma, ExtReal::from_double(c.r0 / 32.0)) <= 0, "");
    }

    // eps2 = E2(eps1 / 4L; theta, gamma, Lambda_s)
    Envelopes env = stability_envelopes(n, s, theta, out.gamma, Lam,
                                        out.eps1 / ExtReal::from_double(4.0 * L), L, c);
    out.eps2 = env.E2;
    out.check("eps2 <= eps1/(4L)", out.eps2 <= out.eps1 / ExtReal::from_double(4.0 * L),
              "eps2=" + out.eps2.str());

    // j0 = j0_hat(eps2/8; gamma, Lambda_s); j1 at the top of its window
    Thresholds th = thresholds(n, s, out.eps2, out.gamma, Lam, L, c);
    out.j0 = th.j0_hat;
    out.j1 = th.j1_hi;
    out.check("j0 >= j0_hat(eps2/8)", !(out.j0 < th.j0_hat), "j0=" + out.j0.str());
    out.check("j0 <= j1 <= 2^{n/2} C7^n j0", !(out.j1 < out.j0) && !(th.j1_hi < out.j1), "");

    // delta = c5 eps2 / (j1 Lambda_s)
    out.delta = ExtReal::from_double(c5) * out.eps2 / (out.j1 * ExtReal::from_double(Lam));
    out.check("delta <= delta0_hat(eps2, gamma, j1)", !(th.delta0_hat < out.delta),
              "delta=" + out.delta.str());
    out.check("delta <= C24 * sigma",
              out.delta <= ExtReal::from_double(c.C24) * out.sigma, "");
    out.check("delta < 1/(3 C7)",
              out.delta < ExtReal::from_double(1.0 / (3.0 * c.C7)), "");

    // J window (C7^{-1} delta^{-1})^{n/2} <= J <= (2 C7 delta^{-1})^{n/2}
    out.J_lo = (out.delta.pow(-1.0) / ExtReal::from_double(c.C7)).pow(n / 2.0);
    out.J_hi = (out.delta.pow(-1.0) * ExtReal::from_double(2.0 * c.C7)).pow(n / 2.0);
    out.check("J window nonempty", out.J_lo <= out.J_hi, "");

    // Rate constants C34..C43 from their displayed formulas.
    out.C34 = (1.0 / bs) * (n + (s + n) / (s - 1.0));
    out.C35 = ExtReal::from_double((s + n) / (s - 1.0)) *
              (ExtReal::from_double(4.0 * L * c.C12) *
               ExtReal::from_double(C41).pow(-(2.0 - theta / 2.0)))
                  .pow(1.0 / beta);
    out.C36 = ExtReal::from_double(C41).pow(-c200) / ExtReal::from_double(beta);
    out.C37 = (1.0 / beta) * (1.0 + (2.0 - theta / 2.0) / bs);
    out.C38 = c200 / bs;
    out.C39 = ExtReal::from_double(std::pow(2.0, -n / 2.0) * c5 * std::pow(c.C7, -double(n)) / C16) *
              ExtReal::from_double(8.0).pow(double(n) / s) *
              ExtReal::from_double(C41).pow((s + n) / (s - 1.0) + n);
    out.C43 = std::max({out.C34, out.C37, out.C38, 1.0 / (2.0 * n)});
    out.C42 = ExtReal::from_double(c.C24) /
              (ExtReal::from_double(C33).pow(36.0) * out.C40.pow(1.0 / (2.0 * n)));
    out.C2 = 1.0 / (72.0 * n * out.C43);

    // S = C42^{-1} + C35 + C36; delta_headline = exp(-exp(S eps1^{-C43}))
    ExtReal S = out.C42.pow(-1.0) + out.C35 + out.C36;
    out.C1 = S.pow(out.C2) * out.C40.pow(-1.0 / (72.0 * n));
    ExtReal inner = S * out.eps1.pow(-out.C43);
    out.delta_headline = ExtReal::exp_of(ExtReal::exp_of(inner, 1), -1);
    out.check("delta_headline <= exp(-e)",
              ExtReal::cmp(out.delta_headline,
                           ExtReal::from_double(std::exp(-std::exp(1.0)))) <= 0,
              "");
    // the x <= exp(x) coarsening step: the headline bound must be the
    // stricter of the two delta choices
    out.check("delta_headline <= delta",
              ExtReal::cmp(out.delta_headline, out.delta) <= 0,
              "delta_headline=" + out.delta_headline.str());

    // delta* threshold: eps1 <= 1/1000 iff delta <= delta*
    {
        ExtReal t = ExtReal::from_double(1000.0).pow(out.C43) * S;
        out.delta_star = ExtReal::exp_of(ExtReal::exp_of(t, 1), -1);
        ExtReal em = ExtReal::from_double(std::exp(-std::exp(1.0)));
        if (ExtReal::cmp(em, out.delta_star) < 0) out.delta_star = em;
    }

    // Round trip: invert_rate(delta_headline) must reproduce eps exactly in
    // the log-log domain (this is the identity behind the headline estimate).
    {
        ExtReal eps_rt = invert_rate(out.delta_headline, out.C1, out.C2);
        double la = eps_rt.signed_log_double(), lb = eps.signed_log_double();
        bool ok = std::fabs(la - lb) <= 1e-9 * std::max(1.0, std::fabs(lb));
        out.check("round trip invert(forward(eps)) == eps", ok,
                  "ln eps_rt=" + std::to_string(la) + " ln eps=" + std::to_string(lb));
    }

    out.big = {{"C35", out.C35.str()}, {"C36", out.C36.str()}, {"C39", out.C39.str()},
               {"C40", out.C40.str()}, {"C42", out.C42.str()}, {"C1", out.C1.str()},
               {"S", S.str()}};
    out.constants["C34"] = out.C34;
    out.constants["C37"] = out.C37;
    out.constants["C38"] = out.C38;
    out.constants["C43"] = out.C43;
    out.constants["C2"] = out.C2;

    out.delta_underflows_double = (out.delta.to_double() == 0.0);
    return out;
}

/// C3 of the two-manifold stability corollary:
/// C3 = max(2 C1, D (ln(-ln delta*))^{C2}).
inline ExtReal stability_C3(const ExtReal& C1, double C2, const ExtReal& delta_star, double D) {
    Tower LL = delta_star.loglog_inv();
    ExtReal term2 = ExtReal::from_double(D) * ExtReal::from_log(1, LL).pow(C2);
    ExtReal term1 = ExtReal::from_double(2.0) * C1;
    return ExtReal::cmp(term1, term2) >= 0 ? term1 : term2;
}

// ---------------------------------------------------------------------------
// Appendix order-of-magnitude table: every quantity is gamma^e up to factors
// independent of gamma; the table carries the exponents e.
// ---------------------------------------------------------------------------
struct AppendixRow {
    std::string name;
    double exponent;       // quantity ~ gamma^exponent
    std::string formula;   // provenance of the exponent
};

/// Machine-checkable exponent table (quantities ~ gamma^e); n-dependent rows
/// carry the 58(n+1) bookkeeping that assumes alpha^N = 1/2.
inline std::vector<AppendixRow> appendix_table(int n) {
    std::vector<AppendixRow> rows;
    auto put = [&](const std::string& nm, double e, const std::string& f) {
        rows.push_back({nm, e, f});
    };
    put("C_l", 1, "cut radius");
    put("p_1", 2, "pseudoconvexity margin");
    put("M_1", -4, "1/p_1^2");
    put("lambda", -4, "max(M_1, e, 1/C_l^2)");
    put("c_T", -12, "lambda^3");
    put("R_1", 4, "min(1, gamma^2, 1/lambda)");
    put("eps0_app", 12, "1/lambda^3");
    // R_2 = min over six candidates; min of values = max of exponents
    {
        std::vector<double> cand = {4, 9, 6, 9, 14, 20};
        double e = *std::max_element(cand.begin(), cand.end());
        put("R_2", e, "min{g^4,g^9,g^6,g^9,g^14,g^20}");
    }
    put("sigma_app", 8, "c_T R_2 = g^{-12+20}");
    put("tau_0", -20, "M_1 (lambda^2 + c_T R_2)^2 ...");
    put("delta_app", 48, "c_T R_2^3 = g^{-12+60}");
    // r = lambda^2 C_l^2 R_2^3 / (lambda + c_T R_2^2): denominator dominated
    // by lambda = g^{-4}
    put("r", (-8.0 + 2.0 + 60.0) - (-4.0), "lambda^2 C_l^2 R_2^3 / lambda");
    put("c_1T", 2, "sqrt(M_1/tau_0 + 1/lambda)");
    put("c_1X", -58.0 * (n + 1), "1/(1-alpha) with alpha^N = 1/2");
    put("one_minus_alpha", 58.0 * (n + 1), "r^{n+1}");
    put("N_c170", -58.0 * (n + 1), "1/r^{n+1}");
    return rows;
}

inline double appendix_exponent(const std::vector<AppendixRow>& t, const std::string& name) {
    for (const auto& r : t)
        if (r.name == name) return r.exponent;
    throw Error("appendix_table: unknown row " + name);
}

}  // namespace specrec
