#include "psk/problem.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "psk/assembler.hpp"
#include "psk/linsys.hpp"

namespace psk {

using nlohmann::json;

// defined in taylor.cpp
json expr_to_json_obj(const CoeffExpr& e);
CoeffExpr expr_from_json_obj(const json& j, const std::string& path);

int PdeConstraint::max_derivative_order() const {
    int d = 0;
    for (const PdeTerm& t : terms)
        d = std::max(d, t.dx + t.dxi);
    return d;
}

int BoundaryConstraint::max_trace_deriv() const {
    int d = 0;
    for (const BoundaryTerm& t : terms)
        d = std::max(d, t.trace_deriv);
    return d;
}

bool KernelProblem::is_split_kernel(int k) const {
    if (!split)
        return false;
    return std::find(split->kernels.begin(), split->kernels.end(), k) != split->kernels.end();
}

KernelProblem localize(const KernelProblem& p, double x0, double xi0) {
    KernelProblem out = p;
    out.x0 = p.x0 + x0;
    out.xi0 = p.xi0 + xi0;

    auto shift_bc = [&](BoundaryConstraint& bc) {
        bc.line.gamma = bc.line.alpha * x0 + bc.line.gamma - xi0;
        if (auto* ir = std::get_if<IntegralRhs>(&bc.rhs))
            ir->lower -= xi0;
    };
    for (BoundaryConstraint& bc : out.bcs)
        shift_bc(bc);
    if (out.split) {
        for (BoundaryConstraint& bc : out.split->region_a_bcs)
            shift_bc(bc);
        for (BoundaryConstraint& bc : out.split->region_b_bcs)
            shift_bc(bc);
    }

    // Fail early when a coefficient function is singular at the new center.
    auto probe = [&](const std::optional<CoeffExpr>& e, double at) {
        if (e)
            (void)e->eval(at);
    };
    for (const PdeConstraint& c : out.pdes) {
        for (const PdeTerm& t : c.terms) {
            probe(t.a_of_x, out.x0);
            probe(t.b_of_xi, out.xi0);
        }
    }
    auto probe_bc = [&](const BoundaryConstraint& bc) {
        for (const BoundaryTerm& t : bc.terms)
            probe(t.c_of_x, out.x0);
        if (const auto* e = std::get_if<CoeffExpr>(&bc.rhs))
            (void)e->eval(out.x0);
        else
            (void)std::get<IntegralRhs>(bc.rhs).integrand.eval(out.xi0);
    };
    for (const BoundaryConstraint& bc : out.bcs)
        probe_bc(bc);
    if (out.split) {
        for (const BoundaryConstraint& bc : out.split->region_a_bcs)
            probe_bc(bc);
        for (const BoundaryConstraint& bc : out.split->region_b_bcs)
            probe_bc(bc);
        for (const MatchingConstraint& m : out.split->matching)
            probe(m.jump, out.x0);
    }
    return out;
}

// --- kernel groups ----------------------------------------------------------

std::vector<std::vector<int>> kernel_groups(const KernelProblem& p) {
    std::vector<int> parent(static_cast<size_t>(p.n_kernels));
    std::iota(parent.begin(), parent.end(), 0);
    std::function<int(int)> find = [&](int a) {
        while (parent[static_cast<size_t>(a)] != a) {
            parent[static_cast<size_t>(a)] = parent[static_cast<size_t>(parent[static_cast<size_t>(a)])];
            a = parent[static_cast<size_t>(a)];
        }
        return a;
    };
    auto unite = [&](int a, int b) { parent[static_cast<size_t>(find(a))] = find(b); };

    for (const PdeConstraint& c : p.pdes)
        for (size_t t = 1; t < c.terms.size(); ++t)
            unite(c.terms[0].kernel, c.terms[t].kernel);
    auto unite_bc = [&](const BoundaryConstraint& bc) {
        for (size_t t = 1; t < bc.terms.size(); ++t)
            unite(bc.terms[0].kernel, bc.terms[t].kernel);
    };
    for (const BoundaryConstraint& bc : p.bcs)
        unite_bc(bc);
    if (p.split) {
        for (const BoundaryConstraint& bc : p.split->region_a_bcs)
            unite_bc(bc);
        for (const BoundaryConstraint& bc : p.split->region_b_bcs)
            unite_bc(bc);
        for (const MatchingConstraint& m : p.split->matching)
            unite(m.kernel_a, m.kernel_b);
        for (size_t t = 1; t < p.split->kernels.size(); ++t)
            unite(p.split->kernels[0], p.split->kernels[t]);
    }

    std::vector<std::vector<int>> groups;
    std::vector<int> root_of(static_cast<size_t>(p.n_kernels));
    for (int k = 0; k < p.n_kernels; ++k)
        root_of[static_cast<size_t>(k)] = find(k);
    std::vector<int> seen;
    for (int k = 0; k < p.n_kernels; ++k) {
        int r = root_of[static_cast<size_t>(k)];
        auto it = std::find(seen.begin(), seen.end(), r);
        if (it == seen.end()) {
            seen.push_back(r);
            groups.push_back({k});
        } else {
            groups[static_cast<size_t>(it - seen.begin())].push_back(k);
        }
    }
    return groups;
}

// --- validation --------------------------------------------------------------

ValidationReport validate_problem(const KernelProblem& p, int probe_order) {
    ValidationReport rep;
    if (p.n_kernels < 1)
        rep.errors.push_back("problem declares no kernels");
    if (p.domain_length <= 0.0)
        rep.errors.push_back("domain_length must be positive");

    auto check_kernel = [&](int k, const std::string& where) {
        if (k < 0 || k >= p.n_kernels)
            rep.errors.push_back(where + " references kernel " + std::to_string(k) +
                                 " out of range");
    };
    std::vector<bool> pde_covered(static_cast<size_t>(std::max(p.n_kernels, 1)), false);
    std::vector<bool> bc_covered(static_cast<size_t>(std::max(p.n_kernels, 1)), false);

    for (size_t c = 0; c < p.pdes.size(); ++c) {
        if (p.pdes[c].terms.empty())
            rep.errors.push_back("pde[" + std::to_string(c) + "] has no terms");
        for (const PdeTerm& t : p.pdes[c].terms) {
            check_kernel(t.kernel, "pde[" + std::to_string(c) + "]");
            if (t.dx < 0 || t.dxi < 0 || t.dx + t.dxi > 2)
                rep.errors.push_back("pde[" + std::to_string(c) +
                                     "] has derivative order p+q > 2 (or negative)");
            else if (t.kernel >= 0 && t.kernel < p.n_kernels)
                pde_covered[static_cast<size_t>(t.kernel)] = true;
        }
    }
    auto scan_bc = [&](const BoundaryConstraint& bc, const std::string& where) {
        if (bc.terms.empty())
            rep.errors.push_back(where + " has no terms");
        for (const BoundaryTerm& t : bc.terms) {
            check_kernel(t.kernel, where);
            if (t.trace_deriv != 0 && t.trace_deriv != 1)
                rep.errors.push_back(where + " trace_deriv must be 0 or 1");
            else if (t.kernel >= 0 && t.kernel < p.n_kernels)
                bc_covered[static_cast<size_t>(t.kernel)] = true;
        }
    };
    for (size_t c = 0; c < p.bcs.size(); ++c)
        scan_bc(p.bcs[c], "bc[" + std::to_string(c) + "]");
    if (p.split) {
        if (!(p.split->beta > 0.0 && p.split->beta < 1.0))
            rep.errors.push_back("split.beta must lie in (0, 1)");
        for (size_t c = 0; c < p.split->region_a_bcs.size(); ++c)
            scan_bc(p.split->region_a_bcs[c], "split.region_a.bc[" + std::to_string(c) + "]");
        for (size_t c = 0; c < p.split->region_b_bcs.size(); ++c)
            scan_bc(p.split->region_b_bcs[c], "split.region_b.bc[" + std::to_string(c) + "]");
        for (const MatchingConstraint& m : p.split->matching) {
            check_kernel(m.kernel_a, "split.matching");
            check_kernel(m.kernel_b, "split.matching");
            if (m.kernel_a >= 0 && m.kernel_a < p.n_kernels)
                bc_covered[static_cast<size_t>(m.kernel_a)] = true;
            if (m.kernel_b >= 0 && m.kernel_b < p.n_kernels)
                bc_covered[static_cast<size_t>(m.kernel_b)] = true;
        }
        for (int k : p.split->kernels)
            check_kernel(k, "split.kernels");
    }
    for (int k = 0; k < p.n_kernels; ++k) {
        if (!pde_covered[static_cast<size_t>(k)])
            rep.warnings.push_back("kernel " + std::to_string(k) + " appears in no PDE");
        if (!bc_covered[static_cast<size_t>(k)])
            rep.warnings.push_back("kernel " + std::to_string(k) +
                                   " has no boundary or matching data");
    }
    if (!rep.errors.empty())
        return rep;

    // Probe assembly per group: actual row/duplicate counts at a small order.
    for (const std::vector<int>& g : kernel_groups(p)) {
        ValidationGroup vg;
        vg.kernels = g;
        vg.probe_order = probe_order;
        try {
            AssemblyCounts counts = assemble_counts(p, g, probe_order);
            vg.regions = counts.regions;
            vg.unknowns = counts.unknowns;
            vg.pde_rows = counts.pde_rows;
            vg.bc_rows = counts.bc_rows;
            vg.match_rows = counts.match_rows;
            vg.duplicates_removed = counts.duplicates_removed;
            vg.rows_after = counts.rows_after;
            if (vg.rows_after < vg.unknowns)
                rep.warnings.push_back("group starting at kernel " + std::to_string(g[0]) +
                                       " is underdetermined: " + std::to_string(vg.rows_after) +
                                       " rows for " + std::to_string(vg.unknowns) +
                                       " unknowns; solved in the minimum-norm sense");
            else if (vg.rows_after > vg.unknowns)
                rep.warnings.push_back(
                    "group starting at kernel " + std::to_string(g[0]) + " is overdetermined by " +
                    std::to_string(vg.rows_after - vg.unknowns) +
                    " row(s); solved in the least-squares sense");
        } catch (const Error& e) {
            rep.warnings.push_back(std::string("probe assembly failed: ") + e.what());
        }
        rep.groups.push_back(std::move(vg));
    }
    return rep;
}

std::string ValidationReport::summary() const {
    std::ostringstream os;
    for (const std::string& e : errors)
        os << "error: " << e << '\n';
    for (const std::string& w : warnings)
        os << "warning: " << w << '\n';
    for (const ValidationGroup& g : groups) {
        os << "group {";
        for (size_t i = 0; i < g.kernels.size(); ++i)
            os << (i ? "," : "") << g.kernels[i];
        os << "} at probe order " << g.probe_order << ": " << g.unknowns << " unknowns, "
           << g.pde_rows << " pde + " << g.bc_rows << " bc";
        if (g.match_rows > 0)
            os << " + " << g.match_rows << " matching";
        os << " rows";
        if (g.duplicates_removed > 0)
            os << "; square after " << g.duplicates_removed << " duplicate removal"
               << (g.duplicates_removed == 1 ? "" : "s");
        else if (g.rows_after == g.unknowns)
            os << "; square";
        else if (g.rows_after > g.unknowns)
            os << "; overdetermined by " << (g.rows_after - g.unknowns);
        else
            os << "; underdetermined by " << (g.unknowns - g.rows_after);
        os << '\n';
    }
    return os.str();
}

// --- JSON ---------------------------------------------------------------------

namespace {

double require_number(const json& j, const std::string& path) {
    if (!j.is_number())
        throw SchemaError(path, "expected a number");
    return j.get<double>();
}

int require_int(const json& j, const std::string& path) {
    if (!j.is_number_integer())
        throw SchemaError(path, "expected an integer");
    return j.get<int>();
}

const json& require_field(const json& j, const char* name, const std::string& path) {
    if (!j.is_object() || !j.contains(name))
        throw SchemaError(path + "." + name, "missing required field");
    return j[name];
}

std::optional<CoeffExpr> opt_expr(const json& j, const char* name, const std::string& path) {
    if (!j.contains(name) || j[name].is_null())
        return std::nullopt;
    return expr_from_json_obj(j[name], path + "." + name);
}

BoundaryConstraint parse_bc(const json& j, const std::string& path) {
    BoundaryConstraint bc;
    const json& line = require_field(j, "line", path);
    bc.line.alpha = require_number(require_field(line, "alpha", path + ".line"), path + ".line.alpha");
    bc.line.gamma = require_number(require_field(line, "gamma", path + ".line"), path + ".line.gamma");
    const json& terms = require_field(j, "terms", path);
    if (!terms.is_array() || terms.empty())
        throw SchemaError(path + ".terms", "boundary constraint needs at least one term");
    for (size_t t = 0; t < terms.size(); ++t) {
        std::string tp = path + ".terms[" + std::to_string(t) + "]";
        BoundaryTerm bt;
        bt.kernel = require_int(require_field(terms[t], "kernel", tp), tp + ".kernel");
        bt.c_of_x = opt_expr(terms[t], "c", tp);
        if (terms[t].contains("trace_deriv"))
            bt.trace_deriv = require_int(terms[t]["trace_deriv"], tp + ".trace_deriv");
        bc.terms.push_back(std::move(bt));
    }
    const json& rhs = require_field(j, "rhs", path);
    if (rhs.is_object() && rhs.contains("integral")) {
        const json& in = rhs["integral"];
        std::string ip = path + ".rhs.integral";
        IntegralRhs ir{expr_from_json_obj(require_field(in, "integrand", ip), ip + ".integrand"),
                       require_number(require_field(in, "lower", ip), ip + ".lower"),
                       require_number(require_field(in, "scale", ip), ip + ".scale")};
        bc.rhs = std::move(ir);
    } else {
        bc.rhs = expr_from_json_obj(rhs, path + ".rhs");
    }
    return bc;
}

json bc_to_json(const BoundaryConstraint& bc) {
    json j;
    j["line"] = json{{"alpha", bc.line.alpha}, {"gamma", bc.line.gamma}};
    j["terms"] = json::array();
    for (const BoundaryTerm& t : bc.terms) {
        json jt;
        jt["kernel"] = t.kernel;
        jt["c"] = t.c_of_x ? expr_to_json_obj(*t.c_of_x) : json(nullptr);
        jt["trace_deriv"] = t.trace_deriv;
        j["terms"].push_back(std::move(jt));
    }
    if (const auto* ir = std::get_if<IntegralRhs>(&bc.rhs)) {
        j["rhs"] = json{{"integral", json{{"integrand", expr_to_json_obj(ir->integrand)},
                                          {"lower", ir->lower},
                                          {"scale", ir->scale}}}};
    } else {
        j["rhs"] = expr_to_json_obj(std::get<CoeffExpr>(bc.rhs));
    }
    return j;
}

} // namespace

KernelProblem parse_problem(const std::string& text) {
    json j = json::parse(text, nullptr, false);
    if (j.is_discarded())
        throw SchemaError("$", "problem document is not valid JSON");
    if (!j.is_object())
        throw SchemaError("$", "problem document must be a JSON object");

    KernelProblem p;
    p.n_kernels = require_int(require_field(j, "kernels", "$"), "$.kernels");
    p.domain_length = require_number(require_field(j, "domain_length", "$"), "$.domain_length");
    const json& center = require_field(j, "center", "$");
    if (!center.is_array() || center.size() != 2)
        throw SchemaError("$.center", "center must be [x0, xi0]");
    p.x0 = require_number(center[0], "$.center[0]");
    p.xi0 = require_number(center[1], "$.center[1]");

    if (j.contains("order") && !j["order"].is_null()) {
        if (j["order"].is_number_integer()) {
            p.default_orders = {j["order"].get<int>()};
        } else if (j["order"].is_array()) {
            for (size_t i = 0; i < j["order"].size(); ++i)
                p.default_orders.push_back(
                    require_int(j["order"][i], "$.order[" + std::to_string(i) + "]"));
        } else {
            throw SchemaError("$.order", "order must be an integer or a list of integers");
        }
    }

    const json& pdes = require_field(j, "pdes", "$");
    if (!pdes.is_array())
        throw SchemaError("$.pdes", "expected an array");
    for (size_t c = 0; c < pdes.size(); ++c) {
        std::string cp = "$.pdes[" + std::to_string(c) + "]";
        PdeConstraint pc;
        const json& terms = require_field(pdes[c], "terms", cp);
        if (!terms.is_array() || terms.empty())
            throw SchemaError(cp + ".terms", "pde constraint needs at least one term");
        for (size_t t = 0; t < terms.size(); ++t) {
            std::string tp = cp + ".terms[" + std::to_string(t) + "]";
            PdeTerm pt;
            pt.kernel = require_int(require_field(terms[t], "kernel", tp), tp + ".kernel");
            pt.a_of_x = opt_expr(terms[t], "a", tp);
            pt.b_of_xi = opt_expr(terms[t], "b", tp);
            const json& deriv = require_field(terms[t], "deriv", tp);
            if (!deriv.is_array() || deriv.size() != 2)
                throw SchemaError(tp + ".deriv", "deriv must be [p, q]");
            pt.dx = require_int(deriv[0], tp + ".deriv[0]");
            pt.dxi = require_int(deriv[1], tp + ".deriv[1]");
            pt.weight = require_number(require_field(terms[t], "weight", tp), tp + ".weight");
            pc.terms.push_back(std::move(pt));
        }
        p.pdes.push_back(std::move(pc));
    }

    const json& bcs = require_field(j, "bcs", "$");
    if (!bcs.is_array())
        throw SchemaError("$.bcs", "expected an array");
    for (size_t c = 0; c < bcs.size(); ++c)
        p.bcs.push_back(parse_bc(bcs[c], "$.bcs[" + std::to_string(c) + "]"));

    if (j.contains("split") && !j["split"].is_null()) {
        const json& js = j["split"];
        SplitSpec s;
        s.beta = require_number(require_field(js, "beta", "$.split"), "$.split.beta");
        const json& ks = require_field(js, "kernels", "$.split");
        if (!ks.is_array())
            throw SchemaError("$.split.kernels", "expected an array of kernel indices");
        for (size_t i = 0; i < ks.size(); ++i)
            s.kernels.push_back(require_int(ks[i], "$.split.kernels[" + std::to_string(i) + "]"));
        auto region_bcs = [&](const char* name) {
            std::vector<BoundaryConstraint> out;
            const json& jr = require_field(js, name, "$.split");
            const json& rb = require_field(jr, "bcs", std::string("$.split.") + name);
            if (!rb.is_array())
                throw SchemaError(std::string("$.split.") + name + ".bcs", "expected an array");
            for (size_t c = 0; c < rb.size(); ++c)
                out.push_back(parse_bc(rb[c], std::string("$.split.") + name + ".bcs[" +
                                                  std::to_string(c) + "]"));
            return out;
        };
        s.region_a_bcs = region_bcs("region_a");
        s.region_b_bcs = region_bcs("region_b");
        if (js.contains("matching")) {
            const json& jm = js["matching"];
            if (!jm.is_array())
                throw SchemaError("$.split.matching", "expected an array");
            for (size_t i = 0; i < jm.size(); ++i) {
                std::string mp = "$.split.matching[" + std::to_string(i) + "]";
                MatchingConstraint m;
                m.kernel_a = require_int(require_field(jm[i], "kernel_a", mp), mp + ".kernel_a");
                m.kernel_b = require_int(require_field(jm[i], "kernel_b", mp), mp + ".kernel_b");
                m.jump = opt_expr(jm[i], "jump", mp);
                s.matching.push_back(std::move(m));
            }
        }
        p.split = std::move(s);
    }
    return p;
}

std::string serialize_problem(const KernelProblem& p) {
    json j;
    j["kernels"] = p.n_kernels;
    j["domain_length"] = p.domain_length;
    j["center"] = json::array({p.x0, p.xi0});
    if (p.default_orders.size() == 1)
        j["order"] = p.default_orders[0];
    else if (p.default_orders.size() > 1)
        j["order"] = p.default_orders;
    j["pdes"] = json::array();
    for (const PdeConstraint& c : p.pdes) {
        json jc;
        jc["terms"] = json::array();
        for (const PdeTerm& t : c.terms) {
            json jt;
            jt["kernel"] = t.kernel;
            jt["a"] = t.a_of_x ? expr_to_json_obj(*t.a_of_x) : json(nullptr);
            jt["b"] = t.b_of_xi ? expr_to_json_obj(*t.b_of_xi) : json(nullptr);
            jt["deriv"] = json::array({t.dx, t.dxi});
            jt["weight"] = t.weight;
            jc["terms"].push_back(std::move(jt));
        }
        j["pdes"].push_back(std::move(jc));
    }
    j["bcs"] = json::array();
    for (const BoundaryConstraint& bc : p.bcs)
        j["bcs"].push_back(bc_to_json(bc));
    if (p.split) {
        json js;
        js["beta"] = p.split->beta;
        js["kernels"] = p.split->kernels;
        js["region_a"] = json{{"bcs", json::array()}};
        for (const BoundaryConstraint& bc : p.split->region_a_bcs)
            js["region_a"]["bcs"].push_back(bc_to_json(bc));
        js["region_b"] = json{{"bcs", json::array()}};
        for (const BoundaryConstraint& bc : p.split->region_b_bcs)
            js["region_b"]["bcs"].push_back(bc_to_json(bc));
        js["matching"] = json::array();
        for (const MatchingConstraint& m : p.split->matching) {
            json jm;
            jm["kernel_a"] = m.kernel_a;
            jm["kernel_b"] = m.kernel_b;
            jm["jump"] = m.jump ? expr_to_json_obj(*m.jump) : json(nullptr);
            js["matching"].push_back(std::move(jm));
        }
        j["split"] = std::move(js);
    }
    return j.dump(2);
}

} // namespace psk
