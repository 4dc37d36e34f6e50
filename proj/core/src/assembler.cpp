#include "psk/assembler.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

namespace psk {

using nlohmann::json;

// defined in taylor.cpp
json expr_to_json_obj(const CoeffExpr& e);
CoeffExpr expr_from_json_obj(const json& j, const std::string& path);

namespace {

// --- unknown layout ---------------------------------------------------------

struct Layout {
    int N = 0;
    std::int64_t block = 0; // l(N)
    int regions = 1;
    std::vector<int> kernels;              // sorted group members
    std::vector<std::pair<int, int>> slots; // (kernel, region), region-major

    int slot_index(int kernel, int region) const {
        auto it = std::find(kernels.begin(), kernels.end(), kernel);
        if (it == kernels.end())
            throw IndexError("kernel not in this group");
        return region * static_cast<int>(kernels.size()) +
               static_cast<int>(it - kernels.begin());
    }
    std::int64_t total() const {
        return static_cast<std::int64_t>(slots.size()) * block;
    }
};

Layout make_layout(const KernelProblem& p, std::vector<int> kernels, int N) {
    std::sort(kernels.begin(), kernels.end());
    Layout lay;
    lay.N = N;
    lay.block = idx_l(N);
    lay.kernels = std::move(kernels);
    bool any_split = false, all_split = true;
    for (int k : lay.kernels) {
        bool s = p.is_split_kernel(k);
        any_split = any_split || s;
        all_split = all_split && s;
    }
    if (any_split && !all_split)
        throw DimensionMismatch("a kernel group mixes split and non-split kernels");
    lay.regions = any_split ? 2 : 1;
    for (int r = 0; r < lay.regions; ++r)
        for (int k : lay.kernels)
            lay.slots.push_back({k, r});
    return lay;
}

// --- constraint blocks --------------------------------------------------------

struct Block {
    enum class Kind { Pde, Bc, Match };
    Kind kind = Kind::Pde;
    std::string tag;
    int region = 0;
    int band_order = 0; // series order (pde) or polynomial degree (bc/match)
    std::vector<std::pair<int, OpMatrix>> mats; // (slot, l(N) x width)
    std::vector<double> rhs;                    // length = width
};

OpMatrix keep_cols(const OpMatrix& m, std::int64_t ncols, OpKind kind) {
    std::vector<OpMatrix::Entry> kept;
    for (const OpMatrix::Entry& e : m.entries())
        if (e.col < ncols)
            kept.push_back(e);
    return OpMatrix(kind, m.rows(), ncols, std::move(kept));
}

OpMatrix deriv_matrix(int N, int p, int q, int out_order) {
    if (p + q == 0)
        return build_truncate(N, out_order);
    std::optional<OpMatrix> acc;
    for (int i = 0; i < p; ++i) {
        OpMatrix d = build_dx(N);
        acc = acc ? acc->compose(d) : d;
    }
    for (int i = 0; i < q; ++i) {
        OpMatrix d = build_dxi(N);
        acc = acc ? acc->compose(d) : d;
    }
    return keep_cols(*acc, idx_l(out_order), OpKind::Composite);
}

Block build_pde_block(const KernelProblem& p, const PdeConstraint& c, int region, int N,
                      const Layout& lay, std::string tag) {
    const int d = c.max_derivative_order();
    if (N < d)
        throw OrderError("truncation order " + std::to_string(N) +
                         " is below the constraint's derivative order");
    const int out = N - d;
    std::map<int, std::vector<OpMatrix>> per_kernel;
    for (const PdeTerm& t : c.terms) {
        OpMatrix m = deriv_matrix(N, t.dx, t.dxi, out);
        if (t.b_of_xi)
            m = m.compose(build_mul_xi(expand(*t.b_of_xi, p.xi0, N), out, out));
        if (t.a_of_x)
            m = m.compose(build_mul_x(expand(*t.a_of_x, p.x0, N), out, out));
        per_kernel[t.kernel].push_back(m.scaled(t.weight));
    }
    Block blk;
    blk.kind = Block::Kind::Pde;
    blk.tag = std::move(tag);
    blk.region = region;
    blk.band_order = out;
    for (auto& [k, mats] : per_kernel)
        blk.mats.push_back({lay.slot_index(k, region), OpMatrix::sum(mats)});
    blk.rhs.assign(static_cast<size_t>(idx_l(out)), 0.0);
    return blk;
}

Block build_bc_block(const KernelProblem& p, const BoundaryConstraint& bc, int region, int N,
                     const Layout& lay, std::string tag) {
    const int band = N - bc.max_trace_deriv();
    const std::int64_t width = band + 1;
    std::map<int, std::vector<OpMatrix>> per_kernel;
    for (const BoundaryTerm& t : bc.terms) {
        OpMatrix chain = build_trace(bc.line.alpha, bc.line.gamma, N);
        if (t.trace_deriv == 1)
            chain = chain.compose(build_uni_derivative(N));
        if (t.c_of_x)
            chain = chain.compose(build_uni_mul(expand(*t.c_of_x, p.x0, N), N));
        per_kernel[t.kernel].push_back(keep_cols(chain, width, OpKind::Composite));
    }
    Block blk;
    blk.kind = Block::Kind::Bc;
    blk.tag = std::move(tag);
    blk.region = region;
    blk.band_order = band;
    for (auto& [k, mats] : per_kernel)
        blk.mats.push_back({lay.slot_index(k, region), OpMatrix::sum(mats)});

    blk.rhs.assign(static_cast<size_t>(width), 0.0);
    if (const auto* g = std::get_if<CoeffExpr>(&bc.rhs)) {
        UniSeries gs = expand(*g, p.x0, N);
        for (int t = 0; t <= band; ++t)
            blk.rhs[static_cast<size_t>(t)] = gs[t];
    } else {
        const IntegralRhs& ir = std::get<IntegralRhs>(bc.rhs);
        UniSeries integ = expand(ir.integrand, p.xi0, N);
        UniSeries anti = integ.antiderivative(ir.lower);
        std::vector<double> composed =
            affine_compose(anti.coeffs(), bc.line.alpha, bc.line.gamma);
        for (int t = 0; t <= band; ++t)
            blk.rhs[static_cast<size_t>(t)] = ir.scale * composed[static_cast<size_t>(t)];
    }
    return blk;
}

Block build_match_block(const KernelProblem& p, const MatchingConstraint& m, int N,
                        const Layout& lay, std::string tag) {
    const double beta = p.split->beta;
    const double gamma = beta * p.x0 - p.xi0; // split line in tilde coordinates
    OpMatrix trace = build_trace(beta, gamma, N);
    Block blk;
    blk.kind = Block::Kind::Match;
    blk.tag = std::move(tag);
    blk.band_order = N;
    blk.mats.push_back({lay.slot_index(m.kernel_b, 1), trace});
    blk.mats.push_back({lay.slot_index(m.kernel_a, 0), trace.scaled(-1.0)});
    blk.rhs.assign(static_cast<size_t>(N) + 1, 0.0);
    if (m.jump) {
        UniSeries js = expand(*m.jump, p.x0, N);
        for (int t = 0; t <= N; ++t)
            blk.rhs[static_cast<size_t>(t)] = js[t];
    }
    return blk;
}

bool constraint_in_group(const std::vector<int>& group, std::span<const int> kernels_used) {
    bool first = std::find(group.begin(), group.end(), kernels_used[0]) != group.end();
    for (int k : kernels_used) {
        bool in = std::find(group.begin(), group.end(), k) != group.end();
        if (in != first)
            throw DimensionMismatch("constraint straddles kernel groups");
    }
    return first;
}

std::vector<Block> build_blocks(const KernelProblem& p, const std::vector<int>& group, int N,
                                const Layout& lay) {
    std::vector<Block> out;
    for (size_t ci = 0; ci < p.pdes.size(); ++ci) {
        std::vector<int> used;
        for (const PdeTerm& t : p.pdes[ci].terms)
            used.push_back(t.kernel);
        if (!constraint_in_group(group, used))
            continue;
        for (int r = 0; r < lay.regions; ++r) {
            std::string tag = "pde" + std::to_string(ci);
            if (lay.regions == 2)
                tag += r == 0 ? "/regionA" : "/regionB";
            out.push_back(build_pde_block(p, p.pdes[ci], r, N, lay, std::move(tag)));
        }
    }
    auto bc_kernels = [](const BoundaryConstraint& bc) {
        std::vector<int> used;
        for (const BoundaryTerm& t : bc.terms)
            used.push_back(t.kernel);
        return used;
    };
    if (lay.regions == 1) {
        for (size_t bi = 0; bi < p.bcs.size(); ++bi) {
            if (!constraint_in_group(group, bc_kernels(p.bcs[bi])))
                continue;
            out.push_back(build_bc_block(p, p.bcs[bi], 0, N, lay, "bc" + std::to_string(bi)));
        }
    } else {
        for (size_t bi = 0; bi < p.bcs.size(); ++bi)
            if (constraint_in_group(group, bc_kernels(p.bcs[bi])))
                throw DimensionMismatch("top-level boundary constraint references a split kernel; "
                                        "use split.region_a/region_b");
        for (size_t bi = 0; bi < p.split->region_a_bcs.size(); ++bi) {
            if (!constraint_in_group(group, bc_kernels(p.split->region_a_bcs[bi])))
                continue;
            out.push_back(build_bc_block(p, p.split->region_a_bcs[bi], 0, N, lay,
                                         "bcA" + std::to_string(bi)));
        }
        for (size_t bi = 0; bi < p.split->region_b_bcs.size(); ++bi) {
            if (!constraint_in_group(group, bc_kernels(p.split->region_b_bcs[bi])))
                continue;
            out.push_back(build_bc_block(p, p.split->region_b_bcs[bi], 1, N, lay,
                                         "bcB" + std::to_string(bi)));
        }
        for (size_t mi = 0; mi < p.split->matching.size(); ++mi) {
            const MatchingConstraint& m = p.split->matching[mi];
            std::array<int, 2> used{m.kernel_a, m.kernel_b};
            if (!constraint_in_group(group, used))
                continue;
            out.push_back(build_match_block(p, m, N, lay, "match" + std::to_string(mi)));
        }
    }
    return out;
}

void append_block_rows(SparseSystem& sys, const Block& blk, const Layout& lay,
                       std::int64_t base) {
    const size_t width = blk.rhs.size();
    std::vector<std::vector<std::pair<std::int64_t, double>>> rows(width);
    for (const auto& [slot, mat] : blk.mats) {
        const std::int64_t off = base + static_cast<std::int64_t>(slot) * lay.block;
        for (const OpMatrix::Entry& e : mat.entries())
            if (static_cast<size_t>(e.col) < width)
                rows[static_cast<size_t>(e.col)].push_back({off + e.row, e.value});
    }
    std::int32_t tag = sys.intern_tag(blk.tag);
    for (size_t t = 0; t < width; ++t)
        sys.append_row(std::move(rows[t]), blk.rhs[t], tag);
}

} // namespace

SparseSystem assemble_group(const KernelProblem& p, const std::vector<int>& kernels, int N,
                            AssemblyCounts* counts) {
    Layout lay = make_layout(p, kernels, N);
    SparseSystem sys(lay.total());
    std::vector<Block> blocks = build_blocks(p, kernels, N, lay);
    AssemblyCounts acc;
    acc.regions = lay.regions;
    acc.unknowns = lay.total();
    for (const Block& blk : blocks) {
        append_block_rows(sys, blk, lay, 0);
        std::int64_t n = static_cast<std::int64_t>(blk.rhs.size());
        switch (blk.kind) {
        case Block::Kind::Pde: acc.pde_rows += n; break;
        case Block::Kind::Bc: acc.bc_rows += n; break;
        case Block::Kind::Match: acc.match_rows += n; break;
        }
    }
    sys.dedup_rows();
    acc.duplicates_removed = sys.rows_removed();
    acc.rows_after = sys.n_rows();
    if (counts)
        *counts = acc;
    return sys;
}

SparseSystem assemble(const KernelProblem& p, int N) {
    std::vector<std::vector<int>> groups = kernel_groups(p);
    std::int64_t total = 0;
    std::vector<Layout> lays;
    for (const auto& g : groups) {
        lays.push_back(make_layout(p, g, N));
        total += lays.back().total();
    }
    SparseSystem sys(total);
    std::int64_t base = 0;
    for (size_t gi = 0; gi < groups.size(); ++gi) {
        for (const Block& blk : build_blocks(p, groups[gi], N, lays[gi]))
            append_block_rows(sys, blk, lays[gi], base);
        base += lays[gi].total();
    }
    sys.dedup_rows();
    return sys;
}

AssemblyCounts assemble_counts(const KernelProblem& p, const std::vector<int>& kernels, int N) {
    AssemblyCounts counts;
    (void)assemble_group(p, kernels, N, &counts);
    return counts;
}

// --- solve -------------------------------------------------------------------

const TriSeries& SolveReport::series_for(int kernel, int region) const {
    for (const KernelSolution& ks : kernels)
        if (ks.kernel == kernel && ks.region == region)
            return ks.series;
    throw IndexError("no solved series for kernel " + std::to_string(kernel) + " region " +
                     std::to_string(region));
}

double SolveReport::eval_kernel(const KernelProblem& p, int kernel, double x, double xi) const {
    int region = 0;
    if (p.is_split_kernel(kernel) && xi > p.split->beta * x)
        region = 1;
    return series_for(kernel, region).eval(x, xi);
}

std::vector<int> resolve_orders(const KernelProblem& p, const std::vector<int>& orders) {
    const size_t n_groups = kernel_groups(p).size();
    const std::vector<int>& src = orders.empty() ? p.default_orders : orders;
    if (src.empty())
        throw OrderError("no truncation order given (problem has no default)");
    if (src.size() == 1)
        return std::vector<int>(n_groups, src[0]);
    if (src.size() == n_groups)
        return src;
    throw OrderError("expected one order or one per kernel group (" +
                     std::to_string(n_groups) + " groups)");
}

SolveReport solve_problem(const KernelProblem& p, const std::vector<int>& orders, double tol,
                          int grid_n) {
    const auto t0 = std::chrono::steady_clock::now();
    std::vector<std::vector<int>> groups = kernel_groups(p);
    std::vector<int> ords = resolve_orders(p, orders);

    SolveReport rep;
    rep.orders = ords;
    double total_nnz = 0.0, total_elems = 0.0;
    for (size_t gi = 0; gi < groups.size(); ++gi) {
        const int N = ords[gi];
        AssemblyCounts counts;
        SparseSystem sys = assemble_group(p, groups[gi], N, &counts);
        SolveResult sol = sys.solve(tol);

        Layout lay = make_layout(p, groups[gi], N);
        for (size_t s = 0; s < lay.slots.size(); ++s) {
            auto [kernel, region] = lay.slots[s];
            std::vector<double> coeffs(
                sol.coeffs.begin() + static_cast<std::ptrdiff_t>(s) * lay.block,
                sol.coeffs.begin() + static_cast<std::ptrdiff_t>(s + 1) * lay.block);
            rep.kernels.push_back({kernel, region, TriSeries(N, p.x0, p.xi0, std::move(coeffs))});
        }

        GroupReport gr;
        gr.kernels = lay.kernels;
        gr.regions = lay.regions;
        gr.order = N;
        gr.rows = sys.n_rows();
        gr.unknowns = sys.n_unknowns();
        gr.nnz = sys.nnz();
        gr.rows_removed = sys.rows_removed();
        gr.sparsity = sys.sparsity();
        gr.residual_linear = sol.residual_norm;
        gr.rank_deficient = sol.rank_deficient;
        gr.least_squares = sol.least_squares;
        rep.groups.push_back(gr);

        rep.residual_linear = std::max(rep.residual_linear, sol.residual_norm);
        rep.rank_deficient = rep.rank_deficient || sol.rank_deficient;
        rep.rows_removed += sys.rows_removed();
        total_nnz += static_cast<double>(sys.nnz());
        total_elems += static_cast<double>(sys.n_rows()) * static_cast<double>(sys.n_unknowns());
    }
    rep.sparsity = total_elems > 0.0 ? 1.0 - total_nnz / total_elems : 1.0;
    std::sort(rep.kernels.begin(), rep.kernels.end(), [](const auto& a, const auto& b) {
        return a.kernel != b.kernel ? a.kernel < b.kernel : a.region < b.region;
    });
    rep.wall_time =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (grid_n > 0)
        rep.residual_grid = residual_grid(rep, p, grid_n);
    return rep;
}

// --- residual grids ------------------------------------------------------------

namespace {

double adaptive_simpson(const CoeffExpr& f, double a, double m, double b, double fa, double fm,
                        double fb, double whole, double tol, int depth) {
    double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    double flm = f.eval(lm), frm = f.eval(rm);
    double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    if (depth <= 0 || std::abs(left + right - whole) <= 15.0 * tol)
        return left + right + (left + right - whole) / 15.0;
    return adaptive_simpson(f, a, lm, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
           adaptive_simpson(f, m, rm, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

double integrate_expr(const CoeffExpr& f, double a, double b) {
    if (a == b)
        return 0.0;
    double fa = f.eval(a), fb = f.eval(b), fm = f.eval(0.5 * (a + b));
    double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    return adaptive_simpson(f, a, 0.5 * (a + b), b, fa, fm, fb, whole, 1e-12, 24);
}

struct DerivCache {
    std::map<std::array<int, 3>, TriSeries> cache;
    const SolveReport& rep;
    explicit DerivCache(const SolveReport& r) : rep(r) {}

    const TriSeries& get(int kernel, int region, int dx, int dxi) {
        std::array<int, 3> key{kernel * 4 + region, dx, dxi};
        auto it = cache.find(key);
        if (it != cache.end())
            return it->second;
        TriSeries s = rep.series_for(kernel, region);
        for (int i = 0; i < dx; ++i)
            s = s.derivative_x();
        for (int i = 0; i < dxi; ++i)
            s = s.derivative_xi();
        return cache.emplace(key, std::move(s)).first->second;
    }
};

// Sample x-interval on which xi = alpha*x + gamma_orig stays inside the
// closed triangle 0 <= xi <= x <= L. Empty -> nullopt.
std::optional<std::pair<double, double>> line_interval(double alpha, double gamma_o, double L) {
    double lo = 0.0, hi = L;
    const double eps = 1e-12;
    // xi >= 0
    if (alpha > 0.0)
        lo = std::max(lo, -gamma_o / alpha);
    else if (alpha < 0.0)
        hi = std::min(hi, -gamma_o / alpha);
    else if (gamma_o < -eps)
        return std::nullopt;
    // xi <= x
    double am1 = 1.0 - alpha;
    if (am1 > 0.0)
        lo = std::max(lo, gamma_o / am1);
    else if (am1 < 0.0)
        hi = std::min(hi, gamma_o / am1);
    else if (gamma_o > eps)
        return std::nullopt;
    if (lo > hi + eps)
        return std::nullopt;
    return std::make_pair(lo, std::min(hi, L));
}

double eval_poly(std::span<const double> c, double x) {
    double acc = 0.0;
    for (size_t i = c.size(); i-- > 0;)
        acc = acc * x + c[i];
    return acc;
}

} // namespace

std::vector<ConstraintResidual> residual_grid(const SolveReport& rep, const KernelProblem& p,
                                              int grid_n) {
    if (grid_n < 2)
        throw DimensionMismatch("grid_n must be at least 2");
    std::vector<std::vector<int>> groups = kernel_groups(p);
    if (rep.orders.size() != groups.size())
        throw DimensionMismatch("report order count does not match the problem's groups");

    const double L = p.domain_length;
    DerivCache dc(rep);
    std::vector<ConstraintResidual> out;

    for (size_t gi = 0; gi < groups.size(); ++gi) {
        const int N = rep.orders[gi];
        Layout lay = make_layout(p, groups[gi], N);
        std::vector<Block> blocks = build_blocks(p, groups[gi], N, lay);

        // Coefficient vectors per slot.
        std::vector<std::span<const double>> kappa(lay.slots.size());
        for (size_t s = 0; s < lay.slots.size(); ++s)
            kappa[s] = rep.series_for(lay.slots[s].first, lay.slots[s].second).coeffs();

        // Triangle sample points per region.
        auto region_points = [&](int region) {
            std::vector<std::pair<double, double>> pts;
            for (int t = 0; t < grid_n; ++t) {
                double x = L * static_cast<double>(t) / static_cast<double>(grid_n - 1);
                for (int s = 0; s < grid_n; ++s) {
                    double xi = x * static_cast<double>(s) / static_cast<double>(grid_n - 1);
                    if (lay.regions == 2) {
                        double bx = p.split->beta * x;
                        if (region == 0 && xi > bx)
                            continue;
                        if (region == 1 && xi < bx)
                            continue;
                    }
                    pts.push_back({x, xi});
                }
            }
            return pts;
        };

        for (const Block& blk : blocks) {
            ConstraintResidual cr;
            cr.tag = blk.tag;

            // Enforced-band residual: coefficients carried by the block rows.
            std::vector<double> v(blk.rhs.size(), 0.0);
            for (const auto& [slot, mat] : blk.mats) {
                std::vector<double> contrib = mat.apply(kappa[static_cast<size_t>(slot)]);
                for (size_t t = 0; t < v.size(); ++t)
                    v[t] += contrib[t];
            }
            for (size_t t = 0; t < v.size(); ++t)
                v[t] -= blk.rhs[t];

            if (blk.kind == Block::Kind::Pde) {
                TriSeries rs(blk.band_order, p.x0, p.xi0, v);
                double banded = 0.0, full = 0.0;
                // Locate the source constraint to evaluate exactly.
                size_t ci = 0;
                {
                    std::string digits = blk.tag.substr(3, blk.tag.find('/') - 3);
                    ci = static_cast<size_t>(std::stoul(digits));
                }
                const PdeConstraint& c = p.pdes[ci];
                for (auto [x, xi] : region_points(blk.region)) {
                    banded = std::max(banded, std::abs(rs.eval(x, xi)));
                    double acc = 0.0;
                    for (const PdeTerm& t : c.terms) {
                        double a = t.a_of_x ? t.a_of_x->eval(x) : 1.0;
                        double b = t.b_of_xi ? t.b_of_xi->eval(xi) : 1.0;
                        acc += t.weight * a * b *
                               dc.get(t.kernel, blk.region, t.dx, t.dxi).eval(x, xi);
                    }
                    full = std::max(full, std::abs(acc));
                }
                cr.banded = banded;
                cr.full = full;
            } else {
                // Line constraints: banded polynomial is in the tilde x.
                const bool is_match = blk.kind == Block::Kind::Match;
                double alpha, gamma_tilde;
                const BoundaryConstraint* bc = nullptr;
                const MatchingConstraint* mc = nullptr;
                if (is_match) {
                    size_t mi = static_cast<size_t>(std::stoul(blk.tag.substr(5)));
                    mc = &p.split->matching[mi];
                    alpha = p.split->beta;
                    gamma_tilde = alpha * p.x0 - p.xi0;
                } else {
                    size_t bi;
                    if (blk.tag.rfind("bcA", 0) == 0) {
                        bi = static_cast<size_t>(std::stoul(blk.tag.substr(3)));
                        bc = &p.split->region_a_bcs[bi];
                    } else if (blk.tag.rfind("bcB", 0) == 0) {
                        bi = static_cast<size_t>(std::stoul(blk.tag.substr(3)));
                        bc = &p.split->region_b_bcs[bi];
                    } else {
                        bi = static_cast<size_t>(std::stoul(blk.tag.substr(2)));
                        bc = &p.bcs[bi];
                    }
                    alpha = bc->line.alpha;
                    gamma_tilde = bc->line.gamma;
                }
                const double gamma_o = gamma_tilde + p.xi0 - alpha * p.x0;
                auto iv = line_interval(alpha, gamma_o, L);
                double banded = 0.0, full = 0.0;
                if (iv) {
                    for (int g = 0; g < grid_n; ++g) {
                        double x = iv->first + (iv->second - iv->first) * static_cast<double>(g) /
                                                   static_cast<double>(grid_n - 1);
                        double xi = alpha * x + gamma_o;
                        banded = std::max(banded, std::abs(eval_poly(v, x - p.x0)));
                        double acc;
                        if (is_match) {
                            acc = rep.series_for(mc->kernel_b, 1).eval(x, xi) -
                                  rep.series_for(mc->kernel_a, 0).eval(x, xi);
                            if (mc->jump)
                                acc -= mc->jump->eval(x);
                        } else {
                            acc = 0.0;
                            for (const BoundaryTerm& t : bc->terms) {
                                double cval = t.c_of_x ? t.c_of_x->eval(x) : 1.0;
                                double trace;
                                if (t.trace_deriv == 1) {
                                    trace = dc.get(t.kernel, blk.region, 1, 0).eval(x, xi) +
                                            alpha * dc.get(t.kernel, blk.region, 0, 1).eval(x, xi);
                                } else {
                                    trace = dc.get(t.kernel, blk.region, 0, 0).eval(x, xi);
                                }
                                acc += cval * trace;
                            }
                            if (const auto* g0 = std::get_if<CoeffExpr>(&bc->rhs)) {
                                acc -= g0->eval(x);
                            } else {
                                const IntegralRhs& ir = std::get<IntegralRhs>(bc->rhs);
                                double lower_o = ir.lower + p.xi0;
                                acc -= ir.scale * integrate_expr(ir.integrand, lower_o, xi);
                            }
                        }
                        full = std::max(full, std::abs(acc));
                    }
                }
                cr.banded = banded;
                cr.full = full;
            }
            out.push_back(std::move(cr));
        }
    }
    return out;
}

// --- the Example-1 recursion oracle ---------------------------------------------

std::vector<double> recursion_oracle_ex1(const UniSeries& lam, int N) {
    if (lam.center() != 0.0)
        throw CenterMismatch("recursion oracle expects an origin-centered series");
    if (lam.order() < N - 1)
        throw OrderError("lam series order must be at least N-1");
    auto lamq = [&](int q) { return q <= lam.order() ? lam[q] : 0.0; };

    std::vector<double> K(static_cast<size_t>(idx_l(N)), 0.0);
    auto at = [&](int i, int j) -> double& { return K[static_cast<size_t>(midx0(i, j))]; };

    for (int i = 1; i <= N; ++i) {
        // B_(i-2)j = sum_q K_(i-2-q)(j-q) lam_q, all lower total degrees.
        std::vector<double> B(static_cast<size_t>(std::max(i - 1, 0)), 0.0);
        for (int j = 0; j <= i - 2; ++j) {
            double acc = 0.0;
            for (int q = 0; q <= j; ++q)
                acc += at(i - 2 - q, j - q) * lamq(q);
            B[static_cast<size_t>(j)] = acc;
        }
        // Chains K_i(j+2) = ((i-j)(i-j-1) K_ij - B_(i-2)j) / ((j+2)(j+1));
        // K_i0 = 0, K_i1 = s solves the trace row sum_j K_ij = -lam_(i-1)/(2i).
        std::vector<double> u(static_cast<size_t>(i) + 1, 0.0);
        std::vector<double> v(static_cast<size_t>(i) + 1, 0.0);
        if (i >= 1)
            v[1] = 1.0;
        for (int j = 0; j <= i - 2; ++j) {
            double f = static_cast<double>((i - j) * (i - j - 1));
            double d = static_cast<double>((j + 2) * (j + 1));
            u[static_cast<size_t>(j + 2)] = (f * u[static_cast<size_t>(j)] - B[static_cast<size_t>(j)]) / d;
            v[static_cast<size_t>(j + 2)] = f * v[static_cast<size_t>(j)] / d;
        }
        double su = 0.0, sv = 0.0;
        for (int j = 0; j <= i; ++j) {
            su += u[static_cast<size_t>(j)];
            sv += v[static_cast<size_t>(j)];
        }
        double trace = -0.5 * lamq(i - 1) / static_cast<double>(i);
        double s = (trace - su) / sv;
        for (int j = 1; j <= i; ++j)
            at(i, j) = u[static_cast<size_t>(j)] + s * v[static_cast<size_t>(j)];
    }
    return K;
}

// --- divergence diagnostic -------------------------------------------------------

DivergenceDiagnostic divergence_diagnostic(const TriSeries& s, double L) {
    if (s.order() < 10)
        throw OrderError("divergence diagnostic needs order >= 10");
    const int N = s.order();
    const int start = (N + 1) / 2;
    std::vector<std::pair<double, double>> pts;
    for (int i = start; i <= N; ++i) {
        double m = 0.0;
        for (int j = 0; j <= i; ++j)
            m = std::max(m, std::abs(s.coeff(i, j)));
        if (m > 0.0)
            pts.push_back({static_cast<double>(i), std::log(m)});
    }
    DivergenceDiagnostic d;
    if (pts.size() < 3)
        return d;
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (auto [x, y] : pts) {
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    double n = static_cast<double>(pts.size());
    double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    d.growth_rate = std::exp(slope);
    // Effective evaluation radius of the shifted domain.
    double rx = std::max(std::abs(s.x0()), std::abs(L - s.x0()));
    double rxi = std::max(std::abs(s.xi0()), std::abs(L - s.xi0()));
    d.flag = d.growth_rate * std::max(rx, rxi) > 1.0;
    return d;
}

// --- writers ------------------------------------------------------------------------

std::string format_double(double v) {
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

void write_coeffs_csv(std::ostream& os, const SolveReport& rep, const KernelProblem& p) {
    os << "# pskernel-coeffs-v1\n";
    os << "# domain_length=" << format_double(p.domain_length) << "\n";
    os << "# center=" << format_double(p.x0) << ' ' << format_double(p.xi0) << "\n";
    if (p.split)
        os << "# split_beta=" << format_double(p.split->beta) << "\n";
    for (const KernelSolution& ks : rep.kernels)
        os << "# kernel=" << ks.kernel << " region=" << ks.region
           << " order=" << ks.series.order() << "\n";
    os << "kernel,region,i,j,coeff\n";
    for (const KernelSolution& ks : rep.kernels) {
        for (int i = 0; i <= ks.series.order(); ++i)
            for (int j = 0; j <= i; ++j)
                os << ks.kernel << ',' << ks.region << ',' << i << ',' << j << ','
                   << format_double(ks.series.coeff(i, j)) << '\n';
    }
}

void write_gain_csv(std::ostream& os, const SolveReport& rep, const KernelProblem& p,
                    int grid_points) {
    if (grid_points < 2)
        throw DimensionMismatch("gain grid needs at least 2 points");
    os << "xi";
    std::set<int> kernels;
    for (const KernelSolution& ks : rep.kernels)
        kernels.insert(ks.kernel);
    for (int k : kernels)
        os << ",k" << k;
    os << '\n';
    const double L = p.domain_length;
    for (int g = 0; g < grid_points; ++g) {
        double xi = L * static_cast<double>(g) / static_cast<double>(grid_points - 1);
        os << format_double(xi);
        for (int k : kernels)
            os << ',' << format_double(rep.eval_kernel(p, k, L, xi));
        os << '\n';
    }
}

std::string report_to_json(const SolveReport& rep, const KernelProblem& p,
                           bool include_wall_time) {
    json j;
    j["orders"] = rep.orders;
    j["residual_linear"] = rep.residual_linear;
    j["sparsity"] = rep.sparsity;
    j["rank_deficient"] = rep.rank_deficient;
    j["rows_removed"] = rep.rows_removed;
    if (include_wall_time)
        j["wall_time_s"] = rep.wall_time;
    j["kernels"] = json::array();
    for (const KernelSolution& ks : rep.kernels)
        j["kernels"].push_back(json{{"kernel", ks.kernel},
                                    {"region", ks.region},
                                    {"order", ks.series.order()},
                                    {"center", json::array({p.x0, p.xi0})}});
    j["groups"] = json::array();
    for (const GroupReport& g : rep.groups)
        j["groups"].push_back(json{{"kernels", g.kernels},
                                   {"regions", g.regions},
                                   {"order", g.order},
                                   {"rows", g.rows},
                                   {"unknowns", g.unknowns},
                                   {"nnz", g.nnz},
                                   {"rows_removed", g.rows_removed},
                                   {"sparsity", g.sparsity},
                                   {"residual_linear", g.residual_linear},
                                   {"rank_deficient", g.rank_deficient},
                                   {"least_squares", g.least_squares}});
    j["residual_grid"] = json::array();
    for (const ConstraintResidual& cr : rep.residual_grid)
        j["residual_grid"].push_back(
            json{{"tag", cr.tag}, {"banded", cr.banded}, {"full", cr.full}});
    return j.dump(2);
}

// --- sweeps -----------------------------------------------------------------------

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

double unit_draw(std::uint64_t seed, std::uint64_t param, std::uint64_t index) {
    std::uint64_t h = splitmix64(seed ^ splitmix64(param + 1 + splitmix64(index)));
    return static_cast<double>(h >> 11) * 0x1.0p-53;
}

void substitute_params(json& j, const std::map<std::string, double>& vals) {
    if (j.is_string()) {
        const std::string s = j.get<std::string>();
        if (s.size() > 3 && s.rfind("${", 0) == 0 && s.back() == '}') {
            std::string name = s.substr(2, s.size() - 3);
            auto it = vals.find(name);
            if (it == vals.end())
                throw SchemaError("$", "unknown sweep placeholder \"" + name + "\"");
            j = it->second;
        }
        return;
    }
    if (j.is_object() || j.is_array())
        for (auto& el : j)
            substitute_params(el, vals);
}

} // namespace

SweepSpec parse_sweep(const std::string& text) {
    json j = json::parse(text, nullptr, false);
    if (j.is_discarded())
        throw SchemaError("$", "sweep document is not valid JSON");
    if (!j.is_object() || !j.contains("problem"))
        throw SchemaError("$.problem", "sweep needs an embedded problem template");
    SweepSpec spec;
    spec.problem_template = j["problem"].dump();
    if (j.contains("parameters")) {
        if (!j["parameters"].is_array())
            throw SchemaError("$.parameters", "expected an array");
        for (size_t i = 0; i < j["parameters"].size(); ++i) {
            const json& jp = j["parameters"][i];
            std::string path = "$.parameters[" + std::to_string(i) + "]";
            if (!jp.is_object() || !jp.contains("name"))
                throw SchemaError(path + ".name", "parameter needs a name");
            SweepParameter sp;
            sp.name = jp["name"].get<std::string>();
            sp.min = jp.value("min", 0.0);
            sp.max = jp.value("max", sp.min);
            sp.count = jp.value("count", 1);
            if (sp.count < 1)
                throw SchemaError(path + ".count", "sample count must be >= 1");
            spec.parameters.push_back(std::move(sp));
        }
    }
    if (spec.parameters.empty())
        throw SchemaError("$.parameters", "sweep needs at least one parameter");
    std::string mode = j.value("mode", std::string("grid"));
    if (mode != "grid" && mode != "random")
        throw SchemaError("$.mode", "mode must be \"grid\" or \"random\"");
    spec.random = mode == "random";
    spec.samples = j.value("samples", 0);
    if (spec.random && spec.samples < 1)
        throw SchemaError("$.samples", "random mode needs a positive sample count");
    spec.seed = j.value("seed", 0ULL);
    if (j.contains("order")) {
        if (j["order"].is_number_integer())
            spec.orders = {j["order"].get<int>()};
        else if (j["order"].is_array())
            for (const auto& o : j["order"])
                spec.orders.push_back(o.get<int>());
        else
            throw SchemaError("$.order", "order must be an integer or a list");
    }
    spec.tol = j.value("tol", 1e-10);
    return spec;
}

SweepOutcome run_sweep(const SweepSpec& spec, const std::string& out_dir) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);

    // Enumerate samples in deterministic index order.
    std::int64_t total = 1;
    if (spec.random) {
        total = spec.samples;
    } else {
        for (const SweepParameter& sp : spec.parameters)
            total *= sp.count;
    }

    json tmpl = json::parse(spec.problem_template);
    std::ofstream dataset(fs::path(out_dir) / "dataset.jsonl");
    SweepOutcome outcome;

    for (std::int64_t k = 0; k < total; ++k) {
        std::map<std::string, double> vals;
        if (spec.random) {
            for (size_t pi = 0; pi < spec.parameters.size(); ++pi) {
                const SweepParameter& sp = spec.parameters[pi];
                vals[sp.name] = sp.min + (sp.max - sp.min) *
                                             unit_draw(spec.seed, pi, static_cast<std::uint64_t>(k));
            }
        } else {
            std::int64_t rem = k;
            for (size_t pi = spec.parameters.size(); pi-- > 0;) {
                const SweepParameter& sp = spec.parameters[pi];
                std::int64_t idx = rem % sp.count;
                rem /= sp.count;
                vals[sp.name] =
                    sp.count == 1
                        ? sp.min
                        : sp.min + (sp.max - sp.min) * static_cast<double>(idx) /
                                       static_cast<double>(sp.count - 1);
            }
        }

        json record;
        record["index"] = k;
        record["params"] = json::object();
        for (const auto& [name, v] : vals)
            record["params"][name] = v;

        char name[64];
        std::snprintf(name, sizeof(name), "sample_%06lld.coeffs.csv",
                      static_cast<long long>(k));
        try {
            json doc = tmpl;
            substitute_params(doc, vals);
            KernelProblem p = parse_problem(doc.dump());
            SolveReport rep = solve_problem(p, spec.orders, spec.tol, /*grid_n=*/0);
            std::ofstream csv(fs::path(out_dir) / name, std::ios::binary);
            write_coeffs_csv(csv, rep, p);
            record["status"] = "ok";
            record["order"] = rep.orders;
            record["residual_linear"] = rep.residual_linear;
            record["sparsity"] = rep.sparsity;
            record["rank_deficient"] = rep.rank_deficient;
            record["rows_removed"] = rep.rows_removed;
            record["coeffs_csv"] = name;
            ++outcome.n_ok;
        } catch (const Error& e) {
            record["status"] = "error";
            record["error"] = e.what();
            ++outcome.n_failed;
        }
        dataset << record.dump() << '\n';
    }
    return outcome;
}

} // namespace psk
