#include "delay_spectra/io.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace delay_spectra {

namespace {

MatrixXd parse_matrix(const Json& j, int n, const std::string& where) {
    if (!j.is_array() || static_cast<int>(j.size()) != n)
        throw std::invalid_argument(where + ": expected " + std::to_string(n) + " rows");
    MatrixXd m(n, n);
    for (int r = 0; r < n; ++r) {
        const Json& row = j[static_cast<size_t>(r)];
        if (!row.is_array() || static_cast<int>(row.size()) != n)
            throw std::invalid_argument(where + ": expected " + std::to_string(n) + " columns");
        for (int c = 0; c < n; ++c) m(r, c) = row[static_cast<size_t>(c)].get<double>();
    }
    return m;
}

Json matrix_to_json(const MatrixXd& m) {
    Json rows = Json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        Json row = Json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        rows.push_back(std::move(row));
    }
    return rows;
}

VectorXd parse_vector(const Json& j, const std::string& where) {
    if (!j.is_array()) throw std::invalid_argument(where + ": expected an array");
    VectorXd v(static_cast<Eigen::Index>(j.size()));
    for (size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
    return v;
}

Json vector_to_json(const VectorXd& v) {
    Json out = Json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
    return out;
}

std::vector<ExpPolyTerm> parse_terms(const Json& j, const std::string& where) {
    std::vector<ExpPolyTerm> terms;
    if (j.is_null()) return terms;
    if (!j.is_array()) throw std::invalid_argument(where + ": expected an array of {c,k,d}");
    for (const auto& t : j) {
        ExpPolyTerm term;
        term.c = t.at("c").get<double>();
        term.k = t.value("k", 0);
        term.d = t.value("d", 0.0);
        if (term.k < 0) throw std::invalid_argument(where + ": k must be >= 0");
        terms.push_back(term);
    }
    return terms;
}

Json terms_to_json(const std::vector<ExpPolyTerm>& terms) {
    Json out = Json::array();
    for (const auto& t : terms) out.push_back(Json{{"c", t.c}, {"k", t.k}, {"d", t.d}});
    return out;
}

KernelSpec parse_kernel(const Json& j, KernelKind default_kind, const std::string& where) {
    KernelSpec k;
    std::string kind = j.value("kind", default_kind == KernelKind::volterra ? "volterra" : "finite");
    if (kind == "volterra") k.kind = KernelKind::volterra;
    else if (kind == "finite") k.kind = KernelKind::finite;
    else throw std::invalid_argument(where + ": unknown kernel kind '" + kind + "'");
    k.density = parse_terms(j.value("density", Json::array()), where + ".density");
    if (j.contains("atoms"))
        for (const auto& a : j["atoms"])
            k.atoms.push_back({a.at("tau").get<double>(), a.at("w").get<double>()});
    k.support_bound = j.value("support_bound", 0.0);
    k.alpha_at_zero = j.value("alpha_at_zero", 0.0);
    return k;
}

Json kernel_to_json(const KernelSpec& k) {
    Json atoms = Json::array();
    for (const auto& a : k.atoms) atoms.push_back(Json{{"tau", a.tau}, {"w", a.w}});
    return Json{{"kind", k.kind == KernelKind::volterra ? "volterra" : "finite"},
                {"density", terms_to_json(k.density)},
                {"atoms", std::move(atoms)},
                {"support_bound", k.support_bound},
                {"alpha_at_zero", k.alpha_at_zero}};
}

TimeVaryingMatrix parse_time_matrix(const Json& j, int n, const std::string& where) {
    TimeVaryingMatrix m(n);
    if (j.is_null()) return m;
    if (!j.is_array() || static_cast<int>(j.size()) != n)
        throw std::invalid_argument(where + ": expected " + std::to_string(n) + " rows");
    for (int r = 0; r < n; ++r) {
        const Json& row = j[static_cast<size_t>(r)];
        if (!row.is_array() || static_cast<int>(row.size()) != n)
            throw std::invalid_argument(where + ": ragged row");
        for (int c = 0; c < n; ++c)
            m.at(r, c) = parse_terms(row[static_cast<size_t>(c)], where + " entry");
    }
    return m;
}

Json time_matrix_to_json(const TimeVaryingMatrix& m) {
    Json rows = Json::array();
    for (int r = 0; r < m.dim(); ++r) {
        Json row = Json::array();
        for (int c = 0; c < m.dim(); ++c) row.push_back(terms_to_json(m.at(r, c)));
        rows.push_back(std::move(row));
    }
    return rows;
}

HistoryFunction parse_history(const Json& j, int n, double h) {
    if (j.is_null()) return HistoryFunction::constant(VectorXd::Zero(n), h);
    if (j.contains("constant")) {
        VectorXd v = parse_vector(j["constant"], "history.constant");
        if (v.size() != n) throw std::invalid_argument("history.constant dimension mismatch");
        return HistoryFunction::constant(v, h);
    }
    std::vector<double> breakpoints;
    for (const auto& b : j.at("breakpoints")) breakpoints.push_back(b.get<double>());
    std::vector<MatrixXd> pieces;
    for (const auto& p : j.at("pieces")) {
        MatrixXd coeff(n, 4);
        if (static_cast<int>(p.size()) != n)
            throw std::invalid_argument("history piece dimension mismatch");
        for (int r = 0; r < n; ++r) {
            const auto& row = p[static_cast<size_t>(r)];
            if (row.size() > 4) throw std::invalid_argument("history pieces must be cubic");
            for (int c = 0; c < 4; ++c)
                coeff(r, c) = c < static_cast<int>(row.size()) ? row[static_cast<size_t>(c)].get<double>() : 0.0;
        }
        pieces.push_back(std::move(coeff));
    }
    VectorXd terminal = j.contains("terminal_value")
                            ? parse_vector(j["terminal_value"], "history.terminal_value")
                            : VectorXd::Zero(n);
    HistoryFunction hist(std::move(breakpoints), std::move(pieces), std::move(terminal));
    auto errs = hist.validate();
    if (!errs.empty()) throw std::invalid_argument("invalid history: " + errs.front());
    return hist;
}

Json history_to_json_impl(const HistoryFunction& hist) {
    Json breakpoints = Json::array();
    for (double b : hist.breakpoints()) breakpoints.push_back(b);
    Json pieces = Json::array();
    for (const auto& p : hist.pieces()) {
        Json rows = Json::array();
        for (Eigen::Index r = 0; r < p.rows(); ++r) {
            Json row = Json::array();
            for (Eigen::Index c = 0; c < 4; ++c) row.push_back(p(r, c));
            rows.push_back(std::move(row));
        }
        pieces.push_back(std::move(rows));
    }
    return Json{{"breakpoints", std::move(breakpoints)},
                {"pieces", std::move(pieces)},
                {"terminal_value", vector_to_json(hist.terminal_value())}};
}

}  // namespace

LoadedSpec parse_spec(const Json& j) {
    LoadedSpec spec;
    DelaySystem& sys = spec.system;
    sys.n = j.at("n").get<int>();
    if (sys.n < 1) throw std::invalid_argument("n must be >= 1");

    if (j.contains("point_terms"))
        for (const auto& t : j["point_terms"])
            sys.point_terms.push_back(
                {parse_matrix(t.at("A"), sys.n, "point term A"), t.value("h", 0.0)});
    if (j.contains("volterra_terms"))
        for (const auto& t : j["volterra_terms"])
            sys.volterra_terms.push_back(
                {parse_matrix(t.at("A"), sys.n, "volterra term A"), t.value("shift", 0.0),
                 parse_kernel(t.at("kernel"), KernelKind::volterra, "volterra kernel")});
    if (j.contains("finite_dist_terms"))
        for (const auto& t : j["finite_dist_terms"])
            sys.finite_dist_terms.push_back(
                {parse_matrix(t.at("A"), sys.n, "finite term A"), t.value("span", 0.0),
                 parse_kernel(t.at("kernel"), KernelKind::finite, "finite kernel")});

    double h = 0.0;
    for (const auto& t : sys.point_terms) h = std::max(h, t.h);
    for (const auto& t : sys.volterra_terms) h = std::max(h, t.shift);
    for (const auto& t : sys.finite_dist_terms) h = std::max(h, t.span);
    sys.h = h;

    spec.history = parse_history(j.value("history", Json()), sys.n, h);

    if (j.contains("perturbation") && !j["perturbation"].is_null()) {
        const Json& p = j["perturbation"];
        PerturbationSpec pert;
        auto parse_list = [&](const char* key, size_t count) {
            std::vector<TimeVaryingMatrix> list;
            if (p.contains(key) && !p[key].is_null()) {
                for (const auto& m : p[key]) list.push_back(parse_time_matrix(m, sys.n, key));
                if (list.size() != count)
                    throw std::invalid_argument(std::string(key) + ": one entry per system term");
            }
            return list;
        };
        pert.tilde_point = parse_list("tilde_point", sys.point_terms.size());
        pert.tilde_volterra = parse_list("tilde_volterra", sys.volterra_terms.size());
        pert.tilde_finite = parse_list("tilde_finite", sys.finite_dist_terms.size());
        if (p.contains("f0") && !p["f0"].is_null()) {
            if (p["f0"].contains("constant")) {
                pert.f0.kind = ResidualTerm::Kind::constant;
                pert.f0.constant = parse_vector(p["f0"]["constant"], "f0.constant");
                pert.f0.sup_bound = pert.f0.constant.norm();
            } else {
                throw std::invalid_argument("f0 must be null or {\"constant\": [...]} in spec files");
            }
        }
        pert.gamma = parse_terms(p.value("gamma", Json::array()), "gamma");
        pert.K0 = p.value("K0", 0.0);
        spec.perturbation = std::move(pert);
    }
    return spec;
}

LoadedSpec load_spec_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open spec file: " + path);
    Json j = Json::parse(in);
    return parse_spec(j);
}

Json system_to_json(const DelaySystem& sys) {
    Json point = Json::array();
    for (const auto& t : sys.point_terms)
        point.push_back(Json{{"A", matrix_to_json(t.A)}, {"h", t.h}});
    Json volterra = Json::array();
    for (const auto& t : sys.volterra_terms)
        volterra.push_back(
            Json{{"A", matrix_to_json(t.A)}, {"shift", t.shift}, {"kernel", kernel_to_json(t.kernel)}});
    Json finite = Json::array();
    for (const auto& t : sys.finite_dist_terms)
        finite.push_back(
            Json{{"A", matrix_to_json(t.A)}, {"span", t.span}, {"kernel", kernel_to_json(t.kernel)}});
    return Json{{"n", sys.n},
                {"point_terms", std::move(point)},
                {"volterra_terms", std::move(volterra)},
                {"finite_dist_terms", std::move(finite)},
                {"h", sys.h}};
}

Json history_to_json(const HistoryFunction& hist) { return history_to_json_impl(hist); }

Json perturbation_to_json(const PerturbationSpec& pert) {
    Json j;
    Json tp = Json::array(), tv = Json::array(), tf = Json::array();
    for (const auto& m : pert.tilde_point) tp.push_back(time_matrix_to_json(m));
    for (const auto& m : pert.tilde_volterra) tv.push_back(time_matrix_to_json(m));
    for (const auto& m : pert.tilde_finite) tf.push_back(time_matrix_to_json(m));
    j["tilde_point"] = std::move(tp);
    j["tilde_volterra"] = std::move(tv);
    j["tilde_finite"] = std::move(tf);
    if (pert.f0.kind == ResidualTerm::Kind::constant)
        j["f0"] = Json{{"constant", vector_to_json(pert.f0.constant)}};
    else
        j["f0"] = nullptr;
    j["gamma"] = terms_to_json(pert.gamma);
    j["K0"] = pert.K0;
    return j;
}

Json spec_to_json(const LoadedSpec& spec) {
    Json j = system_to_json(spec.system);
    j["history"] = history_to_json(spec.history);
    j["perturbation"] = spec.perturbation ? perturbation_to_json(*spec.perturbation) : Json();
    return j;
}

Json rootset_to_json(const RootSet& rs) {
    Json roots = Json::array();
    for (const auto& r : rs.roots)
        roots.push_back(Json{{"re", r.lambda.real()},
                             {"im", r.lambda.imag()},
                             {"multiplicity", r.multiplicity},
                             {"residual", r.residual},
                             {"newton_converged", r.newton_converged}});
    return Json{{"roots", std::move(roots)},
                {"region", Json{{"re_min", rs.region.re_min},
                                {"re_max", rs.region.re_max},
                                {"im_min", rs.region.im_min},
                                {"im_max", rs.region.im_max}}},
                {"abscissa", rs.abscissa},
                {"exhaustive", rs.exhaustive},
                {"contour_count", rs.contour_count}};
}

Json certificate_to_json(const Certificate& cert) {
    Json values;
    for (const auto& [k, v] : cert.values) values[k] = v;
    Json subs = Json::array();
    for (const auto& s : cert.subs)
        subs.push_back(Json{{"id", test_id_name(s.id)},
                            {"certified", s.certified},
                            {"gain", s.gain},
                            {"resolvent_sup", s.resolvent_sup},
                            {"margin", s.margin},
                            {"shift_margin", s.shift_margin},
                            {"reason", s.reason},
                            {"omega_star", s.sweep.omega_star}});
    Json j{{"test_id", test_id_name(cert.test_id)},
           {"certified", cert.certified},
           {"betas", cert.betas},
           {"sweep", Json{{"sup", cert.sweep.sup},
                          {"omega_star", cert.sweep.omega_star},
                          {"omega_max", cert.sweep.omega_max},
                          {"grid_points", cert.sweep.grid_points},
                          {"at_boundary", cert.sweep.at_boundary},
                          {"pole_detected", cert.sweep.pole_detected}}},
           {"values", std::move(values)},
           {"subs", std::move(subs)},
           {"notes", cert.notes}};
    if (cert.abscissa_bound) j["abscissa_bound"] = *cert.abscissa_bound;
    else j["abscissa_bound"] = nullptr;
    return j;
}

Json hypothesis_report_to_json(const HypothesisReport& rep) {
    Json roots = Json::array();
    for (const auto& pr : rep.roots)
        roots.push_back(Json{{"sigma", pr.root.sigma},
                             {"multiplicity", pr.root.multiplicity},
                             {"window_integrals", pr.window_integrals},
                             {"eventually_decreasing", pr.eventually_decreasing},
                             {"tail_below_threshold", pr.tail_below_threshold},
                             {"first_failing_window", pr.first_failing_window},
                             {"overflow", pr.overflow}});
    return Json{{"beta", rep.beta},
                {"threshold", rep.threshold},
                {"roots", std::move(roots)},
                {"indicator_averages", rep.indicator_averages},
                {"verdict", rep.pass ? "pass" : "fail"}};
}

Json exponent_fit_to_json(const ExponentFit& fit) {
    return Json{{"mu_hat", fit.mu_hat},   {"nu_hat", fit.nu_hat},
                {"window", Json{{"t1", fit.t1}, {"t2", fit.t2}}},
                {"r2", fit.r2},           {"se_mu", fit.se_mu},
                {"se_resid", fit.se_resid}, {"norm", norm_name(fit.norm)},
                {"n_points", fit.n_points},
                {"oscillation_warning", fit.oscillation_warning}};
}

Json comparison_report_to_json(const ComparisonReport& rep) {
    Json basis = Json::array();
    for (const auto& l : rep.basis_roots) basis.push_back(Json{{"re", l.real()}, {"im", l.imag()}});
    return Json{{"mu", rep.mu},
                {"c_hat", Json{{"re", rep.c_hat.real()}, {"im", rep.c_hat.imag()}}},
                {"residual_rate", rep.residual_rate},
                {"epsilon_hat", rep.epsilon_hat},
                {"classification", comparison_class_name(rep.classification)},
                {"gamma_class", gamma_class_name(rep.gamma_class)},
                {"mu_not_characteristic", rep.mu_not_characteristic},
                {"residual_below_floor", rep.residual_below_floor},
                {"verdict", rep.verdict},
                {"solution_rate", rep.solution_rate},
                {"fit_r2", rep.fit_r2},
                {"residual_fit", exponent_fit_to_json(rep.residual_fit)},
                {"basis_roots", std::move(basis)}};
}

namespace {

void dump_value(const Json& j, std::ostringstream& out, int indent, int depth) {
    auto pad = [&](int d) { out << std::string(static_cast<size_t>(d) * indent, ' '); };
    switch (j.type()) {
        case Json::value_t::object: {
            if (j.empty()) {
                out << "{}";
                return;
            }
            out << "{\n";
            size_t i = 0;
            for (auto it = j.begin(); it != j.end(); ++it, ++i) {
                pad(depth + 1);
                out << '"' << it.key() << "\": ";
                dump_value(it.value(), out, indent, depth + 1);
                if (i + 1 < j.size()) out << ',';
                out << '\n';
            }
            pad(depth);
            out << '}';
            break;
        }
        case Json::value_t::array: {
            if (j.empty()) {
                out << "[]";
                return;
            }
            out << "[\n";
            for (size_t i = 0; i < j.size(); ++i) {
                pad(depth + 1);
                dump_value(j[i], out, indent, depth + 1);
                if (i + 1 < j.size()) out << ',';
                out << '\n';
            }
            pad(depth);
            out << ']';
            break;
        }
        case Json::value_t::number_float: {
            double v = j.get<double>();
            if (std::isfinite(v)) out << format17(v);
            else out << "null";
            break;
        }
        default:
            out << j.dump();
            break;
    }
}

}  // namespace

std::string dump_json_17(const Json& j, int indent) {
    std::ostringstream out;
    dump_value(j, out, indent, 0);
    out << '\n';
    return out.str();
}

void write_json_file(const std::string& path, const Json& j) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << dump_json_17(j);
}

void write_trajectory_csv(const std::string& path, const Trajectory& traj) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "t";
    for (int i = 1; i <= traj.dim(); ++i) out << ",x" << i;
    out << "\n";
    for (size_t j = 0; j < traj.times().size(); ++j) {
        out << format17(traj.times()[j]);
        const VectorXd& x = traj.samples()[j];
        for (Eigen::Index i = 0; i < x.size(); ++i) out << ',' << format17(x(i));
        out << "\n";
    }
}

void write_compare_csv(const std::string& path, const Trajectory& x,
                       const std::function<VectorXd(double)>& y, double h, Norm norm) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "t,log_xt,log_residual\n";
    double step = std::max(x.step(), x.horizon() / 4000.0);
    for (double t = std::max(h, x.step()); t <= x.horizon(); t += step) {
        double xn = string_norm(x, t, std::min(h, t), norm);
        double rn = vec_norm(x.eval(t) - y(t), norm);
        out << format17(t) << ',' << format17(xn > 0 ? std::log(xn) : -750.0) << ','
            << format17(rn > 0 ? std::log(rn) : -750.0) << "\n";
    }
}

}  // namespace delay_spectra
