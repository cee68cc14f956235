#include "servoforge/lti.hpp"

#include <algorithm>
#include <cmath>

#include "servoforge/errors.hpp"

namespace servoforge {

namespace {

void require_dim(bool ok, const std::string& msg) {
    if (!ok) throw DimensionError(msg);
}

// Greedy multiset matching: remove from `pool` the element nearest each of
// `want` if within tol; true when every requested root is found.
bool roots_subset(std::vector<Complex> pool, const std::vector<Complex>& want, double tol) {
    for (const Complex& r : want) {
        auto it = std::min_element(pool.begin(), pool.end(), [&](const Complex& a, const Complex& b) {
            return std::abs(a - r) < std::abs(b - r);
        });
        if (it == pool.end() || std::abs(*it - r) > tol * (1.0 + std::abs(r))) return false;
        pool.erase(it);
    }
    return true;
}

} // namespace

StateSpace::StateSpace(Matrix f_, Matrix g_, Matrix h_, Matrix j_, std::optional<Matrix> gw_)
    : f(std::move(f_)), g(std::move(g_)), h(std::move(h_)), j(std::move(j_)), gw(std::move(gw_)) {
    require_dim(f.square(), "StateSpace: F must be square");
    require_dim(g.rows() == f.rows(), "StateSpace: G row count must match F");
    require_dim(h.cols() == f.cols(), "StateSpace: H column count must match F");
    require_dim(j.rows() == h.rows() && j.cols() == g.cols(), "StateSpace: J must be ny x nu");
    if (gw) {
        require_dim(gw->rows() == f.rows(), "StateSpace: Gw row count must match F");
    }
    if (!f.all_finite() || !g.all_finite() || !h.all_finite() || !j.all_finite())
        throw DomainError("StateSpace: matrix entries must be finite");
}

StateSpace StateSpace::siso(Matrix f, Matrix g, Matrix h, double j) {
    Matrix jm(1, 1);
    jm(0, 0) = j;
    return StateSpace(std::move(f), std::move(g), std::move(h), jm);
}

RationalSiso::RationalSiso(Polynomial num, Polynomial den) : num_(std::move(num)), den_(std::move(den)) {
    if (den_.is_zero()) throw DomainError("RationalSiso: denominator must be nonzero");
    if (num_.is_zero()) return;

    // cancel common roots within tolerance 1e-8
    std::vector<Complex> nr = poly_roots(num_);
    std::vector<Complex> dr = poly_roots(den_);
    bool cancelled = false;
    for (auto it = nr.begin(); it != nr.end();) {
        auto match = std::min_element(dr.begin(), dr.end(), [&](const Complex& a, const Complex& b) {
            return std::abs(a - *it) < std::abs(b - *it);
        });
        if (match != dr.end() && std::abs(*match - *it) < 1e-8 * (1.0 + std::abs(*match))) {
            dr.erase(match);
            it = nr.erase(it);
            cancelled = true;
        } else {
            ++it;
        }
    }
    if (cancelled) {
        num_ = Polynomial::from_roots(nr, num_.leading());
        den_ = Polynomial::from_roots(dr, den_.leading());
    }
}

LoopGain::LoopGain(RationalSiso siso) : rep_(std::move(siso)) {}

LoopGain::LoopGain(StateSpace mimo) : rep_(std::move(mimo)) {
    const StateSpace& s = std::get<StateSpace>(rep_);
    require_dim(s.inputs() == s.outputs(), "LoopGain: state-space loop must be square");
}

bool LoopGain::is_siso() const {
    if (rational()) return true;
    return state_space()->outputs() == 1;
}

std::size_t LoopGain::size() const { return rational() ? 1 : state_space()->outputs(); }

std::vector<Complex> poles(const LoopGain& l) {
    if (const RationalSiso* r = l.rational()) {
        if (r->den().degree() == 0) return {};
        return poly_roots(r->den());
    }
    return eigenvalues(l.state_space()->f);
}

std::vector<Complex> transmission_zeros(const StateSpace& sys) {
    require_dim(sys.inputs() == sys.outputs(), "transmission_zeros: system must be square");
    const std::size_t n = sys.order(), ny = sys.outputs();
    if (n == 0) return {};

    // pencil s*Bhat - Ahat with Ahat = [[F, G],[-H, -J]], Bhat = diag(I, 0)
    Matrix ahat(n + ny, n + ny);
    ahat.set_block(0, 0, sys.f);
    ahat.set_block(0, n, sys.g);
    ahat.set_block(n, 0, -sys.h);
    ahat.set_block(n, n, -sys.j);
    Matrix bhat(n + ny, n + ny);
    for (std::size_t i = 0; i < n; ++i) bhat(i, i) = 1.0;

    // deflate infinite zeros by inverting at a real shift where the pencil
    // is regular; eigenvalues mu of (Ahat - shift*Bhat)^-1 Bhat map back as
    // lambda = shift + 1/mu
    auto zeros_at_shift = [&](double shift, std::vector<Complex>& out) {
        Matrix pencil = ahat;
        for (std::size_t i = 0; i < n; ++i) pencil(i, i) -= shift;
        Matrix inv_b;
        try {
            inv_b = solve_linear(pencil, bhat);
        } catch (const SingularityError&) {
            return false;
        }
        out.clear();
        for (const Complex& m : eigenvalues(inv_b)) {
            if (std::abs(m) < 1e-12) continue; // infinite zero
            Complex lambda = shift + 1.0 / m;
            if (std::abs(lambda) > 1e8) continue;
            out.push_back(lambda);
        }
        return true;
    };

    // infinite zeros of multiplicity k deflate to Jordan-structured noise of
    // size eps^(1/k), which can masquerade as huge finite zeros; genuine
    // zeros are shift-invariant, so keep only values two shifts agree on
    static const double shifts[] = {0.7548776662, 1.6180339887, -1.3247179572, 2.5029078750,
                                    -3.1038034027};
    std::vector<Complex> first, second;
    std::size_t found = 0;
    for (double shift : shifts) {
        if (!zeros_at_shift(shift, found == 0 ? first : second)) continue;
        if (++found == 2) break;
    }
    if (found == 0)
        throw DomainError("transmission_zeros: system pencil is singular at every probe shift");

    std::vector<Complex> out;
    if (found == 1) {
        out = first;
    } else {
        for (const Complex& z : first) {
            auto it = std::min_element(second.begin(), second.end(),
                                       [&](const Complex& a, const Complex& b) {
                                           return std::abs(a - z) < std::abs(b - z);
                                       });
            if (it == second.end() || std::abs(*it - z) > 1e-6 * (1.0 + std::abs(z))) continue;
            out.push_back(0.5 * (z + *it));
            second.erase(it);
        }
    }
    sort_complex(out);
    return out;
}

std::vector<Complex> zeros(const LoopGain& l) {
    if (const RationalSiso* r = l.rational()) {
        if (r->num().is_zero() || r->num().degree() == 0) return {};
        return poly_roots(r->num());
    }
    return transmission_zeros(*l.state_space());
}

std::vector<Complex> closed_loop_poles(const LoopGain& l) {
    if (const RationalSiso* r = l.rational()) {
        Polynomial phi_cl = r->den() + r->num();
        if (phi_cl.degree() == 0) return {};
        return poly_roots(phi_cl);
    }
    const StateSpace& s = *l.state_space();
    Matrix i_plus_j = Matrix::identity(s.outputs()) + s.j;
    Matrix gain;
    try {
        gain = solve_linear(i_plus_j, s.h); // (I+J)^-1 H
    } catch (const SingularityError&) {
        throw DomainError("closed_loop_poles: I + J singular (algebraic loop)");
    }
    return eigenvalues(s.f - s.g * gain);
}

namespace {

CMatrix eval_at(const LoopGain& l, Complex s) {
    if (const RationalSiso* r = l.rational()) {
        CMatrix m(1, 1);
        m(0, 0) = r->evaluate(s);
        return m;
    }
    const StateSpace& ss = *l.state_space();
    const std::size_t n = ss.order();
    // H (sI - F)^-1 G + J
    CMatrix si_f(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t jj = 0; jj < n; ++jj) si_f(i, jj) = (i == jj ? s : Complex(0, 0)) - Complex(ss.f(i, jj), 0.0);
    CMatrix x = solve_linear(si_f, CMatrix::from_real(ss.g));
    return CMatrix::from_real(ss.h) * x + CMatrix::from_real(ss.j);
}

} // namespace

CMatrix eval_freq(const LoopGain& l, double omega) {
    Complex s(0.0, omega);
    for (const Complex& p : poles(l))
        if (std::abs(s - p) < 1e-9)
            throw PoleProximityError("eval_freq: j*omega within 1e-9 of a pole");
    return eval_at(l, s);
}

SensPair sens_eval(const LoopGain& l, double omega) {
    CMatrix lm = eval_freq(l, omega);
    CMatrix ipl = CMatrix::identity(lm.rows()) + lm;
    CMatrix s;
    try {
        s = inverse(ipl);
    } catch (const SingularityError&) {
        throw InstabilityError("sens_eval: I + L(j*omega) singular (closed-loop pole on the axis)");
    }
    return {s, s * lm};
}

namespace {

int siso_type(const RationalSiso& r) {
    int count = 0;
    if (r.den().degree() == 0) return 0;
    for (const Complex& p : poly_roots(r.den()))
        if (std::abs(p) < 1e-7) ++count;
    return count;
}

std::pair<double, double> singular_value_range(const Matrix& m) {
    std::vector<Complex> ev = eigenvalues(m.transpose() * m);
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    for (const Complex& e : ev) {
        double v = std::sqrt(std::max(0.0, e.real()));
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    return {lo, hi};
}

} // namespace

int system_type(const LoopGain& l) {
    if (const RationalSiso* r = l.rational()) return siso_type(*r);
    const StateSpace& ss = *l.state_space();
    if (ss.outputs() == 1) return siso_type(to_rational(ss));

    // probe s^k L(s) at s = 1e-4 for the largest k that keeps the matrix
    // bounded and uniformly invertible
    const double s0 = 1e-4;
    CMatrix lc = eval_at(l, Complex(s0, 0.0));
    Matrix lr(lc.rows(), lc.cols());
    for (std::size_t i = 0; i < lc.rows(); ++i)
        for (std::size_t jj = 0; jj < lc.cols(); ++jj) lr(i, jj) = lc(i, jj).real();

    int best = -1;
    double scale = 1.0;
    for (int k = 0; k <= 6; ++k) {
        Matrix mk = lr * scale;
        auto [smin, smax] = singular_value_range(mk);
        if (smin >= 1e-2 && smax <= 1e6 && smax / smin < 1e10) best = k;
        scale *= s0;
    }

    // cross-check against pole/zero counts at the origin
    std::size_t origin_poles = 0;
    for (const Complex& p : poles(l))
        if (std::abs(p) < 1e-7) ++origin_poles;
    std::size_t origin_zeros = 0;
    for (const Complex& z : transmission_zeros(ss))
        if (std::abs(z) < 1e-7) ++origin_zeros;
    const std::size_t net = origin_poles - origin_zeros;

    if (best < 0) {
        // weak-channel loops fall below the probe's absolute thresholds;
        // accept the structural count when it is uniform and the probe
        // matrix at that order is well conditioned
        if (net % ss.outputs() == 0) {
            const int k0 = static_cast<int>(net / ss.outputs());
            Matrix mk = lr * std::pow(s0, k0);
            auto [smin, smax] = singular_value_range(mk);
            if (smin > 0.0 && smax / smin < 1e6) return k0;
        }
        throw UnsupportedError("system_type: no channel Type fits the probe (mixed or degenerate)");
    }
    if (net != static_cast<std::size_t>(best) * ss.outputs())
        throw UnsupportedError("system_type: channel Types are mixed (origin pole count " +
                               std::to_string(origin_poles) + " does not match Type " +
                               std::to_string(best) + " in every channel)");
    return best;
}

std::vector<InterpolationEntry> check_interpolation(const LoopGain& l) {
    std::vector<InterpolationEntry> report;
    const double rhp_tol = 1e-9;

    if (l.is_siso()) {
        RationalSiso r = l.rational() ? *l.rational() : to_rational(*l.state_space());
        Polynomial phi_cl = r.den() + r.num();
        auto add = [&](const Complex& loc, bool is_pole) {
            InterpolationEntry e;
            e.location = loc;
            e.is_pole = is_pole;
            Complex cl = phi_cl.evaluate(loc);
            e.s_mag = std::abs(r.den().evaluate(loc) / cl);
            e.t_mag = std::abs(r.num().evaluate(loc) / cl);
            e.s_residual = is_pole ? e.s_mag : std::abs(e.s_mag - 1.0);
            e.t_residual = is_pole ? std::abs(e.t_mag - 1.0) : e.t_mag;
            report.push_back(e);
        };
        for (const Complex& p : poles(l))
            if (p.real() > rhp_tol) add(p, true);
        for (const Complex& z : zeros(l))
            if (z.real() > rhp_tol) add(z, false);
        return report;
    }

    // MIMO: only the determinant-based zero conditions are meaningful
    // (|det S| = 0 at RHP poles, |det T| = 0 at RHP zeros); unit-magnitude
    // conditions are direction-dependent and not reported.
    const StateSpace& ss = *l.state_space();
    Polynomial phi_ol = characteristic_polynomial(ss.f);
    std::vector<Complex> cl = closed_loop_poles(l);
    Polynomial phi_cl = Polynomial::from_roots(cl);
    double det_ij = determinant(Matrix::identity(ss.outputs()) + ss.j);
    for (const Complex& p : poles(l)) {
        if (p.real() <= rhp_tol) continue;
        InterpolationEntry e;
        e.location = p;
        e.is_pole = true;
        e.s_mag = std::abs(phi_ol.evaluate(p) / phi_cl.evaluate(p)) / std::abs(det_ij);
        e.s_residual = e.s_mag;
        report.push_back(e);
    }
    for (const Complex& z : transmission_zeros(ss)) {
        if (z.real() <= rhp_tol) continue;
        InterpolationEntry e;
        e.location = z;
        e.is_pole = false;
        CMatrix lm = eval_at(l, z);
        CMatrix s = inverse(CMatrix::identity(lm.rows()) + lm);
        e.s_mag = std::abs(determinant(s));
        e.t_mag = std::abs(determinant(s * lm));
        e.t_residual = e.t_mag;
        report.push_back(e);
    }
    return report;
}

std::string to_string(ModelInclusion m) {
    switch (m) {
        case ModelInclusion::Explicit: return "explicit";
        case ModelInclusion::Implicit: return "implicit";
        default: return "absent";
    }
}

ModelInclusion verify_internal_model(const Polynomial& controller_den, const Polynomial& plant_den,
                                     const Polynomial& q) {
    if (q.is_zero()) throw DomainError("verify_internal_model: q must be nonzero");
    if (q.degree() == 0) return ModelInclusion::Explicit; // trivially divides
    std::vector<Complex> q_roots = poly_roots(q);
    if (controller_den.degree() >= 1 && roots_subset(poly_roots(controller_den), q_roots, 1e-6))
        return ModelInclusion::Explicit;
    if (plant_den.degree() >= 1 && roots_subset(poly_roots(plant_den), q_roots, 1e-6))
        return ModelInclusion::Implicit;
    return ModelInclusion::Absent;
}

StateSpace to_state_space(const RationalSiso& r) {
    const Polynomial den = r.den().monic();
    const Polynomial num = r.num() * (1.0 / r.den().leading());
    const std::size_t n = den.degree();
    if (num.degree() > n) throw DomainError("to_state_space: improper transfer function");
    if (n == 0) {
        Matrix j(1, 1);
        j(0, 0) = num.coeff(0);
        return StateSpace(Matrix(0, 0), Matrix(0, 1), Matrix(1, 0), j);
    }

    // control canonical form on the top-row companion of den
    Matrix f = companion(den);
    Matrix g(n, 1);
    g(0, 0) = 1.0;
    // strictly proper part: num - j*den, j = coefficient of s^n in num
    double j_val = num.coeff(n);
    Matrix h(1, n);
    for (std::size_t k = 0; k < n; ++k) {
        // state i carries s^(n-1-i)/den(s); output picks matching numerator coefficient
        h(0, k) = num.coeff(n - 1 - k) - j_val * den.coeff(n - 1 - k);
    }
    Matrix j(1, 1);
    j(0, 0) = j_val;
    return StateSpace(f, g, h, j);
}

RationalSiso to_rational(const StateSpace& sys) {
    require_dim(sys.inputs() == 1 && sys.outputs() == 1, "to_rational: system must be SISO");
    const std::size_t n = sys.order();
    Polynomial den = characteristic_polynomial(sys.f);
    if (n == 0) return RationalSiso(Polynomial({sys.j(0, 0)}), Polynomial({1.0}));

    // Faddeev recursion: adj(sI-F) = sum_k s^(n-1-k) B_k,
    // B_0 = I, B_k = F B_{k-1} + c_k I with char = s^n + c_1 s^(n-1) + ...
    std::vector<double> num_coeffs(n + 1, 0.0);
    Matrix bk = Matrix::identity(n);
    for (std::size_t k = 0; k < n; ++k) {
        if (k > 0) {
            Matrix fb = sys.f * bk;
            double ck = den.coeff(n - k); // coefficient of s^(n-k)
            bk = fb;
            for (std::size_t i = 0; i < n; ++i) bk(i, i) += ck;
        }
        Matrix hbg = sys.h * bk * sys.g;
        num_coeffs[n - 1 - k] = hbg(0, 0);
    }
    Polynomial num(std::move(num_coeffs));
    num = num + den * sys.j(0, 0);
    return RationalSiso(num, den);
}

StateSpace series(const StateSpace& first, const StateSpace& second) {
    require_dim(second.inputs() == first.outputs(), "series: dimension mismatch at the junction");
    const std::size_t n1 = first.order(), n2 = second.order();
    Matrix f(n1 + n2, n1 + n2);
    f.set_block(0, 0, first.f);
    f.set_block(n1, 0, second.g * first.h);
    f.set_block(n1, n1, second.f);
    Matrix g = vstack(first.g, second.g * first.j);
    Matrix h = hstack(second.j * first.h, second.h);
    Matrix j = second.j * first.j;
    return StateSpace(f, g, h, j);
}

nlohmann::json matrix_to_json(const Matrix& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (std::size_t i = 0; i < m.rows(); ++i) {
        nlohmann::json row = nlohmann::json::array();
        for (std::size_t j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(row);
    }
    return rows;
}

Matrix matrix_from_json(const nlohmann::json& j, const std::string& what) {
    if (!j.is_array() || j.empty()) throw DomainError(what + ": expected a non-empty array of rows");
    // accept a flat numeric array as a single row
    if (j[0].is_number()) {
        Matrix m(1, j.size());
        for (std::size_t k = 0; k < j.size(); ++k) m(0, k) = j[k].get<double>();
        return m;
    }
    const std::size_t rows = j.size(), cols = j[0].size();
    Matrix m(rows, cols);
    for (std::size_t i = 0; i < rows; ++i) {
        if (!j[i].is_array() || j[i].size() != cols)
            throw DomainError(what + ": ragged row-major matrix");
        for (std::size_t c = 0; c < cols; ++c) m(i, c) = j[i][c].get<double>();
    }
    if (!m.all_finite()) throw DomainError(what + ": entries must be finite");
    return m;
}

nlohmann::json to_json(const StateSpace& sys) {
    nlohmann::json j;
    j["f"] = matrix_to_json(sys.f);
    j["g"] = matrix_to_json(sys.g);
    j["h"] = matrix_to_json(sys.h);
    j["j"] = matrix_to_json(sys.j);
    if (sys.gw) j["gw"] = matrix_to_json(*sys.gw);
    return j;
}

nlohmann::json to_json(const RationalSiso& r) {
    return nlohmann::json{{"num", r.num().coeffs()}, {"den", r.den().coeffs()}};
}

StateSpace state_space_from_json(const nlohmann::json& j) {
    for (const char* key : {"f", "g", "h", "j"})
        if (!j.contains(key)) throw DomainError(std::string("system JSON missing key \"") + key + "\"");
    std::optional<Matrix> gw;
    if (j.contains("gw")) gw = matrix_from_json(j["gw"], "gw");
    return StateSpace(matrix_from_json(j["f"], "f"), matrix_from_json(j["g"], "g"),
                      matrix_from_json(j["h"], "h"), matrix_from_json(j["j"], "j"), gw);
}

RationalSiso rational_from_json(const nlohmann::json& j) {
    if (!j.contains("num") || !j.contains("den"))
        throw DomainError("rational JSON needs \"num\" and \"den\" coefficient arrays");
    return RationalSiso(Polynomial(j["num"].get<std::vector<double>>()),
                        Polynomial(j["den"].get<std::vector<double>>()));
}

LoopGain loop_gain_from_json(const nlohmann::json& j) {
    if (j.contains("num")) return LoopGain(rational_from_json(j));
    return LoopGain(state_space_from_json(j));
}

} // namespace servoforge
