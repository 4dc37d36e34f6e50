// pskernel: compute PDE backstepping control kernels as truncated double
// power series. Subcommands: solve, sweep, eval, validate, example.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "psk/assembler.hpp"
#include "psk/examples.hpp"
#include "psk/problem.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitNumerical = 2;
constexpr int kExitSchemaIo = 3;

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw psk::SchemaError("$", "cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw psk::SchemaError("$", "cannot write " + path.string());
    out << content;
}

struct OrderFlags {
    int order = -1;
    std::vector<std::string> per_group; // "k=N" entries keyed by kernel index
};

std::vector<int> resolve_cli_orders(const psk::KernelProblem& p, const OrderFlags& flags) {
    auto groups = psk::kernel_groups(p);
    std::vector<int> orders(groups.size(), -1);
    if (!p.default_orders.empty())
        orders = psk::resolve_orders(p, {});
    if (flags.order > 0)
        orders.assign(groups.size(), flags.order);
    std::vector<std::string> entries;
    for (const std::string& arg : flags.per_group) {
        std::istringstream ss(arg);
        std::string kv;
        while (std::getline(ss, kv, ','))
            if (!kv.empty())
                entries.push_back(kv);
    }
    for (const std::string& kv : entries) {
        auto eq = kv.find('=');
        if (eq == std::string::npos)
            throw psk::SchemaError("$", "--orders entries must look like kernel=N");
        int kernel = std::stoi(kv.substr(0, eq));
        int N = std::stoi(kv.substr(eq + 1));
        bool found = false;
        for (size_t g = 0; g < groups.size(); ++g) {
            if (std::find(groups[g].begin(), groups[g].end(), kernel) != groups[g].end()) {
                orders[g] = N;
                found = true;
                break;
            }
        }
        if (!found)
            throw psk::SchemaError("$", "--orders references unknown kernel in " + kv);
    }
    for (size_t g = 0; g < orders.size(); ++g)
        if (orders[g] <= 0)
            throw psk::SchemaError("$", "no truncation order for kernel group " +
                                            std::to_string(g) +
                                            " (use --order/--orders or the problem's \"order\")");
    return orders;
}

// --- solve -----------------------------------------------------------------

int cmd_solve(const std::string& input, const OrderFlags& orders, const std::string& out_dir,
              int gain_grid, int residual_grid_n, std::optional<std::pair<double, double>> center,
              double tol, bool dump_system) {
    psk::KernelProblem p = psk::parse_problem(read_file(input));
    if (center)
        p = psk::localize(p, center->first - p.x0, center->second - p.xi0);
    std::vector<int> ords = resolve_cli_orders(p, orders);

    psk::SolveReport rep = psk::solve_problem(p, ords, tol, residual_grid_n);

    fs::create_directories(out_dir);
    {
        std::ofstream os(fs::path(out_dir) / "coeffs.csv", std::ios::binary);
        psk::write_coeffs_csv(os, rep, p);
    }
    {
        std::ofstream os(fs::path(out_dir) / "gain.csv", std::ios::binary);
        psk::write_gain_csv(os, rep, p, gain_grid);
    }

    json jrep = json::parse(psk::report_to_json(rep, p));
    json jdiv = json::array();
    bool any_flag = false;
    for (const psk::KernelSolution& ks : rep.kernels) {
        if (ks.series.order() < 10)
            continue;
        psk::DivergenceDiagnostic d = psk::divergence_diagnostic(ks.series, p.domain_length);
        jdiv.push_back(json{{"kernel", ks.kernel},
                            {"region", ks.region},
                            {"growth_rate", d.growth_rate},
                            {"flag", d.flag}});
        if (d.flag) {
            any_flag = true;
            std::cerr << "warning: divergence flag on kernel " << ks.kernel << " region "
                      << ks.region << " (growth rate " << d.growth_rate << ")\n";
        }
    }
    jrep["divergence"] = jdiv;
    write_file(fs::path(out_dir) / "report.json", jrep.dump(2) + "\n");

    if (dump_system) {
        auto groups = psk::kernel_groups(p);
        for (size_t g = 0; g < groups.size(); ++g) {
            psk::SparseSystem sys = psk::assemble_group(p, groups[g], ords[g]);
            std::ofstream ma(fs::path(out_dir) / ("system_g" + std::to_string(g) + ".mtx"));
            std::ofstream rb(fs::path(out_dir) / ("rhs_g" + std::to_string(g) + ".mtx"));
            sys.write_matrix_market(ma, rb);
        }
    }

    double grid_max = 0.0;
    for (const psk::ConstraintResidual& cr : rep.residual_grid)
        grid_max = std::max(grid_max, cr.banded);
    std::cout << "orders=";
    for (size_t i = 0; i < rep.orders.size(); ++i)
        std::cout << (i ? "," : "") << rep.orders[i];
    std::cout << " residual=" << rep.residual_linear << " sparsity=" << rep.sparsity
              << " band_residual=" << grid_max << " rows_removed=" << rep.rows_removed
              << " time=" << rep.wall_time << "s" << (any_flag ? " divergence_flag=1" : "")
              << "\n";
    return kExitOk;
}

// --- eval ------------------------------------------------------------------

struct LoadedCoeffs {
    double domain_length = 1.0;
    double x0 = 0.0, xi0 = 0.0;
    std::optional<double> split_beta;
    std::map<std::pair<int, int>, psk::TriSeries> series; // (kernel, region)

    double eval(int kernel, double x, double xi) const {
        int region = 0;
        if (split_beta && series.count({kernel, 1}) && xi > *split_beta * x)
            region = 1;
        auto it = series.find({kernel, region});
        if (it == series.end())
            throw psk::SchemaError("$", "no series for kernel " + std::to_string(kernel));
        return it->second.eval(x, xi);
    }
    std::vector<int> kernels() const {
        std::vector<int> ks;
        for (const auto& [kr, s] : series)
            if (ks.empty() || ks.back() != kr.first)
                ks.push_back(kr.first);
        return ks;
    }
};

LoadedCoeffs load_coeffs_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw psk::SchemaError("$", "cannot open " + path);
    LoadedCoeffs lc;
    std::map<std::pair<int, int>, int> orders;
    std::map<std::pair<int, int>, std::vector<double>> coeffs;
    std::string line;
    bool header_seen = false;
    while (std::getline(in, line)) {
        if (line.empty())
            continue;
        if (line[0] == '#') {
            std::istringstream ss(line.substr(1));
            std::string key;
            ss >> key;
            if (key.rfind("domain_length=", 0) == 0) {
                lc.domain_length = std::stod(key.substr(14));
            } else if (key.rfind("center=", 0) == 0) {
                lc.x0 = std::stod(key.substr(7));
                ss >> lc.xi0;
            } else if (key.rfind("split_beta=", 0) == 0) {
                lc.split_beta = std::stod(key.substr(11));
            } else if (key.rfind("kernel=", 0) == 0) {
                int k = std::stoi(key.substr(7));
                std::string f2, f3;
                ss >> f2 >> f3;
                int r = std::stoi(f2.substr(f2.find('=') + 1));
                int N = std::stoi(f3.substr(f3.find('=') + 1));
                orders[{k, r}] = N;
                coeffs[{k, r}].assign(static_cast<size_t>(psk::idx_l(N)), 0.0);
            }
            continue;
        }
        if (!header_seen) { // "kernel,region,i,j,coeff"
            header_seen = true;
            continue;
        }
        std::istringstream ss(line);
        std::string tok;
        int vals[4];
        for (int c = 0; c < 4; ++c) {
            if (!std::getline(ss, tok, ','))
                throw psk::SchemaError("$", "malformed coefficient row: " + line);
            vals[c] = std::stoi(tok);
        }
        if (!std::getline(ss, tok))
            throw psk::SchemaError("$", "malformed coefficient row: " + line);
        double v = std::stod(tok);
        auto key = std::make_pair(vals[0], vals[1]);
        auto it = orders.find(key);
        if (it == orders.end())
            throw psk::SchemaError("$", "coefficient row for undeclared kernel/region: " + line);
        int i = vals[2], j = vals[3];
        if (i > it->second || j > i || j < 0)
            throw psk::SchemaError("$", "coefficient index outside declared order: " + line);
        coeffs[key][static_cast<size_t>(psk::midx0(i, j))] = v;
    }
    for (auto& [key, vec] : coeffs)
        lc.series.emplace(key, psk::TriSeries(orders[key], lc.x0, lc.xi0, std::move(vec)));
    if (lc.series.empty())
        throw psk::SchemaError("$", "no kernel series found in " + path);
    return lc;
}

int cmd_eval(const std::string& input, const std::vector<double>& point, bool surface, int grid,
             const std::string& out_path) {
    LoadedCoeffs lc = load_coeffs_csv(input);
    std::ostringstream os;
    std::vector<int> ks = lc.kernels();
    auto kernel_header = [&]() {
        for (int k : ks)
            os << ",k" << k;
        os << '\n';
    };
    if (!point.empty()) {
        os << "x,xi";
        kernel_header();
        os << psk::format_double(point[0]) << ',' << psk::format_double(point[1]);
        for (int k : ks)
            os << ',' << psk::format_double(lc.eval(k, point[0], point[1]));
        os << '\n';
    } else if (surface) {
        os << "x,xi";
        kernel_header();
        for (int t = 0; t < grid; ++t) {
            double x = lc.domain_length * t / static_cast<double>(grid - 1);
            for (int s = 0; s < grid; ++s) {
                double xi = x * s / static_cast<double>(grid - 1);
                os << psk::format_double(x) << ',' << psk::format_double(xi);
                for (int k : ks)
                    os << ',' << psk::format_double(lc.eval(k, x, xi));
                os << '\n';
            }
        }
    } else {
        os << "xi";
        kernel_header();
        for (int g = 0; g < grid; ++g) {
            double xi = lc.domain_length * g / static_cast<double>(grid - 1);
            os << psk::format_double(xi);
            for (int k : ks)
                os << ',' << psk::format_double(lc.eval(k, lc.domain_length, xi));
            os << '\n';
        }
    }
    if (out_path.empty())
        std::cout << os.str();
    else
        write_file(out_path, os.str());
    return kExitOk;
}

// --- validate ----------------------------------------------------------------

int cmd_validate(const std::string& input, int probe_order, const std::string& solution,
                 int grid_n) {
    psk::KernelProblem p = psk::parse_problem(read_file(input));
    psk::ValidationReport rep = psk::validate_problem(p, probe_order > 0 ? probe_order : 6);
    std::cout << rep.summary();
    if (!rep.ok())
        return kExitValidation;
    if (!solution.empty()) {
        LoadedCoeffs lc = load_coeffs_csv(solution);
        psk::SolveReport srep;
        auto groups = psk::kernel_groups(p);
        srep.orders.assign(groups.size(), 0);
        for (const auto& [kr, series] : lc.series) {
            for (size_t g = 0; g < groups.size(); ++g)
                if (std::find(groups[g].begin(), groups[g].end(), kr.first) != groups[g].end())
                    srep.orders[g] = series.order();
            srep.kernels.push_back({kr.first, kr.second, series});
        }
        auto residuals = psk::residual_grid(srep, p, grid_n);
        for (const psk::ConstraintResidual& cr : residuals)
            std::cout << cr.tag << ": banded=" << cr.banded << " full=" << cr.full << "\n";
    }
    return kExitOk;
}

// --- example -------------------------------------------------------------------

int cmd_example(const std::string& name, const std::string& out_dir) {
    psk::KernelProblem p;
    if (name == "ex1")
        p = psk::examples::canonical_example1();
    else if (name == "ex2")
        p = psk::examples::canonical_example2();
    else if (name == "ex3")
        p = psk::examples::canonical_example3();
    else if (name == "ex4")
        p = psk::examples::canonical_example4();
    else if (name == "ex5")
        p = psk::examples::canonical_example5();
    else
        throw psk::SchemaError("$", "unknown example \"" + name + "\" (ex1..ex5)");
    fs::create_directories(out_dir);
    fs::path path = fs::path(out_dir) / (name + ".json");
    write_file(path, psk::serialize_problem(p) + "\n");
    std::cout << path.string() << "\n";
    return kExitOk;
}

// --- sweep ----------------------------------------------------------------------

int cmd_sweep(const std::string& input, const std::string& out_dir, std::optional<int> order,
              std::optional<std::uint64_t> seed) {
    psk::SweepSpec spec = psk::parse_sweep(read_file(input));
    if (order)
        spec.orders = {*order};
    if (seed)
        spec.seed = *seed;
    psk::SweepOutcome outcome = psk::run_sweep(spec, out_dir);
    std::cout << "ok=" << outcome.n_ok << " failed=" << outcome.n_failed << "\n";
    if (outcome.n_ok == 0 && outcome.n_failed > 0)
        return kExitNumerical;
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"power-series computation of PDE backstepping kernels"};
    app.require_subcommand(1);

    std::string input, out_dir = ".", solution, example_name, eval_out;
    OrderFlags orders;
    int gain_grid = 101, residual_grid_n = 201, probe_order = 0, eval_grid = 101;
    double tol = 1e-10;
    std::vector<double> center_vals, point_vals;
    bool dump_system = false, surface = false;
    int sweep_order_val = -1;
    std::int64_t sweep_seed_val = -1;

    CLI::App* solve = app.add_subcommand("solve", "solve a problem JSON file");
    solve->add_option("input", input, "problem JSON")->required();
    solve->add_option("--order", orders.order, "global truncation order");
    solve->add_option("--orders", orders.per_group, "per-group orders as kernel=N");
    solve->add_option("--out", out_dir, "output directory");
    solve->add_option("--grid", gain_grid, "gain.csv grid points");
    solve->add_option("--residual-grid", residual_grid_n, "residual evaluation grid");
    solve->add_option("--center", center_vals, "expansion point override: X0 XI0")->expected(2);
    solve->add_option("--tol", tol, "linear-solve residual tolerance");
    solve->add_flag("--dump-system", dump_system, "write Matrix Market dumps of (A, b)");

    CLI::App* sweep = app.add_subcommand("sweep", "run a parameter sweep");
    sweep->add_option("input", input, "sweep JSON")->required();
    sweep->add_option("--out", out_dir, "output directory");
    sweep->add_option("--order", sweep_order_val, "override truncation order");
    sweep->add_option("--seed", sweep_seed_val, "override random seed");

    CLI::App* eval = app.add_subcommand("eval", "evaluate a coefficient CSV");
    eval->add_option("input", input, "coeffs.csv")->required();
    eval->add_option("--point", point_vals, "evaluate at a single (x, xi)")->expected(2);
    eval->add_flag("--surface", surface, "evaluate on a triangle grid");
    eval->add_option("--grid", eval_grid, "grid points");
    eval->add_option("--out", eval_out, "output CSV path (default: stdout)");

    CLI::App* validate = app.add_subcommand("validate", "counting and residual checks");
    validate->add_option("input", input, "problem JSON")->required();
    validate->add_option("--order", probe_order, "probe order for counting");
    validate->add_option("--solution", solution, "coefficient CSV of a prior solve");
    validate->add_option("--grid", residual_grid_n, "residual evaluation grid");

    CLI::App* example = app.add_subcommand("example", "emit a built-in example problem");
    example->add_option("name", example_name, "ex1 | ex2 | ex3 | ex4 | ex5")->required();
    example->add_option("--out", out_dir, "output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitSchemaIo;
    }

    try {
        if (solve->parsed()) {
            std::optional<std::pair<double, double>> center;
            if (center_vals.size() == 2)
                center = std::make_pair(center_vals[0], center_vals[1]);
            return cmd_solve(input, orders, out_dir, gain_grid, residual_grid_n, center, tol,
                             dump_system);
        }
        if (sweep->parsed()) {
            std::optional<int> so;
            std::optional<std::uint64_t> ss;
            if (sweep_order_val > 0)
                so = sweep_order_val;
            if (sweep_seed_val >= 0)
                ss = static_cast<std::uint64_t>(sweep_seed_val);
            return cmd_sweep(input, out_dir, so, ss);
        }
        if (eval->parsed())
            return cmd_eval(input, point_vals, surface, eval_grid, eval_out);
        if (validate->parsed())
            return cmd_validate(input, probe_order, solution, residual_grid_n);
        if (example->parsed())
            return cmd_example(example_name, out_dir);
    } catch (const psk::SchemaError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitSchemaIo;
    } catch (const psk::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitNumerical;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitNumerical;
    }
    return kExitSchemaIo;
}
