#include "psk/taylor.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>

#include <nlohmann/json.hpp>

namespace psk {

using nlohmann::json;

struct CoeffExpr::Node {
    Kind kind = Kind::Const;
    double value = 0.0;
    int exponent = 0;
    std::shared_ptr<const Node> lhs;
    std::shared_ptr<const Node> rhs;
};

namespace {

std::shared_ptr<const CoeffExpr::Node> make_node(CoeffExpr::Node n) {
    return std::make_shared<const CoeffExpr::Node>(std::move(n));
}

} // namespace

CoeffExpr CoeffExpr::constant(double value) {
    return CoeffExpr(make_node({Kind::Const, value, 0, nullptr, nullptr}));
}

CoeffExpr CoeffExpr::var() {
    return CoeffExpr(make_node({Kind::Var, 0.0, 0, nullptr, nullptr}));
}

CoeffExpr CoeffExpr::add(CoeffExpr a, CoeffExpr b) {
    return CoeffExpr(make_node({Kind::Add, 0.0, 0, a.node_, b.node_}));
}

CoeffExpr CoeffExpr::sub(CoeffExpr a, CoeffExpr b) {
    return CoeffExpr(make_node({Kind::Sub, 0.0, 0, a.node_, b.node_}));
}

CoeffExpr CoeffExpr::mul(CoeffExpr a, CoeffExpr b) {
    return CoeffExpr(make_node({Kind::Mul, 0.0, 0, a.node_, b.node_}));
}

CoeffExpr CoeffExpr::div(CoeffExpr a, CoeffExpr b) {
    return CoeffExpr(make_node({Kind::Div, 0.0, 0, a.node_, b.node_}));
}

CoeffExpr CoeffExpr::sin(CoeffExpr a) {
    return CoeffExpr(make_node({Kind::Sin, 0.0, 0, a.node_, nullptr}));
}

CoeffExpr CoeffExpr::cos(CoeffExpr a) {
    return CoeffExpr(make_node({Kind::Cos, 0.0, 0, a.node_, nullptr}));
}

CoeffExpr CoeffExpr::exp(CoeffExpr a) {
    return CoeffExpr(make_node({Kind::Exp, 0.0, 0, a.node_, nullptr}));
}

CoeffExpr CoeffExpr::sqrt(CoeffExpr a) {
    return CoeffExpr(make_node({Kind::Sqrt, 0.0, 0, a.node_, nullptr}));
}

CoeffExpr CoeffExpr::pow(CoeffExpr base, int exponent) {
    return CoeffExpr(make_node({Kind::Pow, 0.0, exponent, base.node_, nullptr}));
}

CoeffExpr::Kind CoeffExpr::kind() const { return node_->kind; }
double CoeffExpr::value() const { return node_->value; }
int CoeffExpr::exponent() const { return node_->exponent; }

CoeffExpr CoeffExpr::lhs() const { return CoeffExpr(node_->lhs); }
CoeffExpr CoeffExpr::rhs() const { return CoeffExpr(node_->rhs); }

namespace {

double eval_node(const CoeffExpr::Node* n, double x) {
    switch (n->kind) {
    case CoeffExpr::Kind::Const:
        return n->value;
    case CoeffExpr::Kind::Var:
        return x;
    case CoeffExpr::Kind::Add:
        return eval_node(n->lhs.get(), x) + eval_node(n->rhs.get(), x);
    case CoeffExpr::Kind::Sub:
        return eval_node(n->lhs.get(), x) - eval_node(n->rhs.get(), x);
    case CoeffExpr::Kind::Mul:
        return eval_node(n->lhs.get(), x) * eval_node(n->rhs.get(), x);
    case CoeffExpr::Kind::Div: {
        double den = eval_node(n->rhs.get(), x);
        if (den == 0.0)
            throw DomainError("quotient denominator vanishes at x = " + std::to_string(x));
        return eval_node(n->lhs.get(), x) / den;
    }
    case CoeffExpr::Kind::Sin:
        return std::sin(eval_node(n->lhs.get(), x));
    case CoeffExpr::Kind::Cos:
        return std::cos(eval_node(n->lhs.get(), x));
    case CoeffExpr::Kind::Exp:
        return std::exp(eval_node(n->lhs.get(), x));
    case CoeffExpr::Kind::Sqrt: {
        double u = eval_node(n->lhs.get(), x);
        if (u < 0.0)
            throw DomainError("sqrt radicand negative at x = " + std::to_string(x));
        return std::sqrt(u);
    }
    case CoeffExpr::Kind::Pow: {
        double u = eval_node(n->lhs.get(), x);
        if (n->exponent < 0 && u == 0.0)
            throw DomainError("negative power of zero at x = " + std::to_string(x));
        return std::pow(u, n->exponent);
    }
    }
    throw Error("unreachable expression kind");
}

} // namespace

double CoeffExpr::eval(double x) const { return eval_node(node_.get(), x); }

CoeffExpr CoeffExpr::derivative() const {
    switch (kind()) {
    case Kind::Const:
        return constant(0.0);
    case Kind::Var:
        return constant(1.0);
    case Kind::Add:
        return add(lhs().derivative(), rhs().derivative());
    case Kind::Sub:
        return sub(lhs().derivative(), rhs().derivative());
    case Kind::Mul: {
        CoeffExpr a = lhs(), b = rhs();
        return add(mul(a.derivative(), b), mul(a, b.derivative()));
    }
    case Kind::Div: {
        CoeffExpr a = lhs(), b = rhs();
        return div(sub(mul(a.derivative(), b), mul(a, b.derivative())), mul(b, b));
    }
    case Kind::Sin: {
        CoeffExpr u = lhs();
        return mul(cos(u), u.derivative());
    }
    case Kind::Cos: {
        CoeffExpr u = lhs();
        return mul(constant(-1.0), mul(sin(u), u.derivative()));
    }
    case Kind::Exp: {
        CoeffExpr u = lhs();
        return mul(exp(u), u.derivative());
    }
    case Kind::Sqrt: {
        CoeffExpr u = lhs();
        return div(u.derivative(), mul(constant(2.0), sqrt(u)));
    }
    case Kind::Pow: {
        CoeffExpr u = lhs();
        int n = exponent();
        if (n == 0)
            return constant(0.0);
        return mul(constant(static_cast<double>(n)), mul(pow(u, n - 1), u.derivative()));
    }
    }
    throw Error("unreachable expression kind");
}

bool CoeffExpr::equals(const CoeffExpr& other) const {
    const Node* a = node_.get();
    const Node* b = other.node_.get();
    if (a == b)
        return true;
    if (a->kind != b->kind || a->value != b->value || a->exponent != b->exponent)
        return false;
    bool lhs_eq = (!a->lhs && !b->lhs) ||
                  (a->lhs && b->lhs && CoeffExpr(a->lhs).equals(CoeffExpr(b->lhs)));
    bool rhs_eq = (!a->rhs && !b->rhs) ||
                  (a->rhs && b->rhs && CoeffExpr(a->rhs).equals(CoeffExpr(b->rhs)));
    return lhs_eq && rhs_eq;
}

CoeffExpr operator+(const CoeffExpr& a, const CoeffExpr& b) { return CoeffExpr::add(a, b); }
CoeffExpr operator-(const CoeffExpr& a, const CoeffExpr& b) { return CoeffExpr::sub(a, b); }
CoeffExpr operator*(const CoeffExpr& a, const CoeffExpr& b) { return CoeffExpr::mul(a, b); }
CoeffExpr operator/(const CoeffExpr& a, const CoeffExpr& b) { return CoeffExpr::div(a, b); }

// --- JSON encoding -------------------------------------------------------

class ExprJson {
public:
    static json encode(const CoeffExpr::Node* n) {
        json j;
        switch (n->kind) {
        case CoeffExpr::Kind::Const:
            j["op"] = "const";
            j["value"] = n->value;
            return j;
        case CoeffExpr::Kind::Var:
            j["op"] = "var";
            return j;
        case CoeffExpr::Kind::Add: return binary("add", n);
        case CoeffExpr::Kind::Sub: return binary("sub", n);
        case CoeffExpr::Kind::Mul: return binary("mul", n);
        case CoeffExpr::Kind::Div: return binary("div", n);
        case CoeffExpr::Kind::Sin: return unary("sin", n);
        case CoeffExpr::Kind::Cos: return unary("cos", n);
        case CoeffExpr::Kind::Exp: return unary("exp", n);
        case CoeffExpr::Kind::Sqrt: return unary("sqrt", n);
        case CoeffExpr::Kind::Pow:
            j = unary("pow", n);
            j["exponent"] = n->exponent;
            return j;
        }
        throw Error("unreachable expression kind");
    }

    static CoeffExpr decode(const json& j, const std::string& path) {
        if (!j.is_object() || !j.contains("op") || !j["op"].is_string())
            throw SchemaError(path, "expression node must be an object with an \"op\" tag");
        const std::string op = j["op"].get<std::string>();
        if (op == "const") {
            if (!j.contains("value") || !j["value"].is_number())
                throw SchemaError(path + ".value", "const node needs a numeric \"value\"");
            return CoeffExpr::constant(j["value"].get<double>());
        }
        if (op == "var")
            return CoeffExpr::var();
        if (op == "add" || op == "sub" || op == "mul" || op == "div") {
            auto [a, b] = two_args(j, path);
            if (op == "add") return CoeffExpr::add(a, b);
            if (op == "sub") return CoeffExpr::sub(a, b);
            if (op == "mul") return CoeffExpr::mul(a, b);
            return CoeffExpr::div(a, b);
        }
        if (op == "sin" || op == "cos" || op == "exp" || op == "sqrt" || op == "pow") {
            CoeffExpr a = one_arg(j, path);
            if (op == "sin") return CoeffExpr::sin(a);
            if (op == "cos") return CoeffExpr::cos(a);
            if (op == "exp") return CoeffExpr::exp(a);
            if (op == "sqrt") return CoeffExpr::sqrt(a);
            if (!j.contains("exponent") || !j["exponent"].is_number_integer())
                throw SchemaError(path + ".exponent", "pow node needs an integer \"exponent\"");
            return CoeffExpr::pow(a, j["exponent"].get<int>());
        }
        throw SchemaError(path + ".op", "unknown expression op \"" + op + "\"");
    }

private:
    static json binary(const char* op, const CoeffExpr::Node* n) {
        return json{{"op", op}, {"args", json::array({encode(n->lhs.get()), encode(n->rhs.get())})}};
    }
    static json unary(const char* op, const CoeffExpr::Node* n) {
        return json{{"op", op}, {"args", json::array({encode(n->lhs.get())})}};
    }
    static std::pair<CoeffExpr, CoeffExpr> two_args(const json& j, const std::string& path) {
        if (!j.contains("args") || !j["args"].is_array() || j["args"].size() != 2)
            throw SchemaError(path + ".args", "binary node needs exactly two args");
        return {decode(j["args"][0], path + ".args[0]"), decode(j["args"][1], path + ".args[1]")};
    }
    static CoeffExpr one_arg(const json& j, const std::string& path) {
        if (!j.contains("args") || !j["args"].is_array() || j["args"].size() != 1)
            throw SchemaError(path + ".args", "unary node needs exactly one arg");
        return decode(j["args"][0], path + ".args[0]");
    }
};

std::string CoeffExpr::to_json() const { return ExprJson::encode(node_.get()).dump(); }

CoeffExpr CoeffExpr::from_json(const std::string& text) {
    json j = json::parse(text, nullptr, false);
    if (j.is_discarded())
        throw SchemaError("$", "expression is not valid JSON");
    return ExprJson::decode(j, "$");
}

// Internal bridge for problem.cpp (avoids exposing nlohmann types publicly).
json expr_to_json_obj(const CoeffExpr& e);
CoeffExpr expr_from_json_obj(const json& j, const std::string& path);

json expr_to_json_obj(const CoeffExpr& e) { return json::parse(e.to_json()); }

CoeffExpr expr_from_json_obj(const json& j, const std::string& path) {
    return ExprJson::decode(j, path);
}

// --- UniSeries -----------------------------------------------------------

UniSeries::UniSeries(double center, std::vector<double> coeffs)
    : center_(center), coeffs_(std::move(coeffs)) {
    if (coeffs_.empty())
        throw OrderError("series needs at least the constant coefficient");
}

namespace {

void check_centers(const UniSeries& a, const UniSeries& b) {
    if (a.center() != b.center())
        throw CenterMismatch("series expanded about different points");
}

int shared_order(const UniSeries& a, const UniSeries& b) {
    return std::min(a.order(), b.order());
}

} // namespace

UniSeries UniSeries::add(const UniSeries& other) const {
    check_centers(*this, other);
    int n = shared_order(*this, other);
    std::vector<double> out(static_cast<size_t>(n) + 1);
    for (int i = 0; i <= n; ++i)
        out[static_cast<size_t>(i)] = coeffs_[static_cast<size_t>(i)] + other[i];
    return UniSeries(center_, std::move(out));
}

UniSeries UniSeries::sub(const UniSeries& other) const {
    check_centers(*this, other);
    int n = shared_order(*this, other);
    std::vector<double> out(static_cast<size_t>(n) + 1);
    for (int i = 0; i <= n; ++i)
        out[static_cast<size_t>(i)] = coeffs_[static_cast<size_t>(i)] - other[i];
    return UniSeries(center_, std::move(out));
}

UniSeries UniSeries::mul(const UniSeries& other) const {
    check_centers(*this, other);
    int n = shared_order(*this, other);
    std::vector<double> out(static_cast<size_t>(n) + 1, 0.0);
    for (int i = 0; i <= n; ++i)
        for (int j = 0; j <= n - i; ++j)
            out[static_cast<size_t>(i + j)] += coeffs_[static_cast<size_t>(i)] * other[j];
    return UniSeries(center_, std::move(out));
}

UniSeries UniSeries::div(const UniSeries& other) const {
    check_centers(*this, other);
    if (other[0] == 0.0)
        throw DivisionByZeroSeries("division by a series with zero constant term");
    int n = shared_order(*this, other);
    std::vector<double> out(static_cast<size_t>(n) + 1, 0.0);
    for (int k = 0; k <= n; ++k) {
        double acc = coeffs_[static_cast<size_t>(k)];
        for (int j = 1; j <= k; ++j)
            acc -= other[j] * out[static_cast<size_t>(k - j)];
        out[static_cast<size_t>(k)] = acc / other[0];
    }
    return UniSeries(center_, std::move(out));
}

UniSeries UniSeries::scale(double s) const {
    std::vector<double> out(coeffs_);
    for (double& c : out)
        c *= s;
    return UniSeries(center_, std::move(out));
}

UniSeries UniSeries::derivative() const {
    if (order() < 1)
        throw OrderError("cannot differentiate an order-0 series");
    std::vector<double> out(coeffs_.size() - 1);
    for (size_t i = 0; i + 1 < coeffs_.size(); ++i)
        out[i] = static_cast<double>(i + 1) * coeffs_[i + 1];
    return UniSeries(center_, std::move(out));
}

UniSeries UniSeries::antiderivative(double lower) const {
    std::vector<double> out(coeffs_.size() + 1, 0.0);
    for (size_t i = 0; i < coeffs_.size(); ++i)
        out[i + 1] = coeffs_[i] / static_cast<double>(i + 1);
    // Constant term: the antiderivative vanishes at u = lower (shifted coordinate).
    double at_lower = 0.0;
    for (size_t i = out.size(); i-- > 1;)
        at_lower = (at_lower + out[i]) * lower;
    out[0] = -at_lower;
    return UniSeries(center_, std::move(out));
}

double UniSeries::eval(double x) const {
    double u = x - center_;
    double acc = 0.0;
    for (size_t i = coeffs_.size(); i-- > 0;)
        acc = acc * u + coeffs_[i];
    return acc;
}

UniSeries UniSeries::truncated(int r) const {
    if (r < 0 || r > order())
        throw OrderError("truncation order out of range");
    return UniSeries(center_, std::vector<double>(coeffs_.begin(), coeffs_.begin() + r + 1));
}

// --- Taylor-mode expansion ------------------------------------------------

namespace {

using Coeffs = std::vector<double>;

Coeffs expand_node(const CoeffExpr::Node* n, double center, int order);

Coeffs cauchy_mul(const Coeffs& a, const Coeffs& b) {
    Coeffs out(a.size(), 0.0);
    int n = static_cast<int>(a.size()) - 1;
    for (int i = 0; i <= n; ++i)
        for (int j = 0; j <= n - i; ++j)
            out[static_cast<size_t>(i + j)] += a[static_cast<size_t>(i)] * b[static_cast<size_t>(j)];
    return out;
}

Coeffs cauchy_div(const Coeffs& a, const Coeffs& b) {
    if (b[0] == 0.0)
        throw DomainError("quotient denominator vanishes at the expansion point");
    Coeffs out(a.size(), 0.0);
    int n = static_cast<int>(a.size()) - 1;
    for (int k = 0; k <= n; ++k) {
        double acc = a[static_cast<size_t>(k)];
        for (int j = 1; j <= k; ++j)
            acc -= b[static_cast<size_t>(j)] * out[static_cast<size_t>(k - j)];
        out[static_cast<size_t>(k)] = acc / b[0];
    }
    return out;
}

// sin/cos share the coupled recurrence s' = c u', c' = -s u'.
void sincos_series(const Coeffs& u, Coeffs& s, Coeffs& c) {
    int n = static_cast<int>(u.size()) - 1;
    s.assign(u.size(), 0.0);
    c.assign(u.size(), 0.0);
    s[0] = std::sin(u[0]);
    c[0] = std::cos(u[0]);
    for (int k = 1; k <= n; ++k) {
        double sa = 0.0, ca = 0.0;
        for (int j = 1; j <= k; ++j) {
            double ju = static_cast<double>(j) * u[static_cast<size_t>(j)];
            sa += ju * c[static_cast<size_t>(k - j)];
            ca += ju * s[static_cast<size_t>(k - j)];
        }
        s[static_cast<size_t>(k)] = sa / static_cast<double>(k);
        c[static_cast<size_t>(k)] = -ca / static_cast<double>(k);
    }
}

Coeffs exp_series(const Coeffs& u) {
    int n = static_cast<int>(u.size()) - 1;
    Coeffs e(u.size(), 0.0);
    e[0] = std::exp(u[0]);
    for (int k = 1; k <= n; ++k) {
        double acc = 0.0;
        for (int j = 1; j <= k; ++j)
            acc += static_cast<double>(j) * u[static_cast<size_t>(j)] * e[static_cast<size_t>(k - j)];
        e[static_cast<size_t>(k)] = acc / static_cast<double>(k);
    }
    return e;
}

Coeffs sqrt_series(const Coeffs& u) {
    if (u[0] < 0.0)
        throw DomainError("sqrt radicand negative at the expansion point");
    if (u[0] == 0.0)
        throw DomainError("sqrt radicand vanishes at the expansion point (branch point)");
    int n = static_cast<int>(u.size()) - 1;
    Coeffs s(u.size(), 0.0);
    s[0] = std::sqrt(u[0]);
    for (int k = 1; k <= n; ++k) {
        double acc = u[static_cast<size_t>(k)];
        for (int j = 1; j <= k - 1; ++j)
            acc -= s[static_cast<size_t>(j)] * s[static_cast<size_t>(k - j)];
        s[static_cast<size_t>(k)] = acc / (2.0 * s[0]);
    }
    return s;
}

Coeffs ipow_series(const Coeffs& u, int e) {
    size_t len = u.size();
    if (e == 0) {
        Coeffs one(len, 0.0);
        one[0] = 1.0;
        return one;
    }
    bool invert = e < 0;
    unsigned long m = invert ? static_cast<unsigned long>(-(static_cast<long>(e)))
                             : static_cast<unsigned long>(e);
    Coeffs acc(len, 0.0);
    acc[0] = 1.0;
    Coeffs base = u;
    while (m > 0) {
        if (m & 1UL)
            acc = cauchy_mul(acc, base);
        m >>= 1UL;
        if (m > 0)
            base = cauchy_mul(base, base);
    }
    if (invert) {
        Coeffs one(len, 0.0);
        one[0] = 1.0;
        if (acc[0] == 0.0)
            throw DomainError("negative power of a function vanishing at the expansion point");
        return cauchy_div(one, acc);
    }
    return acc;
}

Coeffs expand_node(const CoeffExpr::Node* n, double center, int order) {
    size_t len = static_cast<size_t>(order) + 1;
    switch (n->kind) {
    case CoeffExpr::Kind::Const: {
        Coeffs c(len, 0.0);
        c[0] = n->value;
        return c;
    }
    case CoeffExpr::Kind::Var: {
        Coeffs c(len, 0.0);
        c[0] = center;
        if (order >= 1)
            c[1] = 1.0;
        return c;
    }
    case CoeffExpr::Kind::Add: {
        Coeffs a = expand_node(n->lhs.get(), center, order);
        Coeffs b = expand_node(n->rhs.get(), center, order);
        for (size_t i = 0; i < len; ++i)
            a[i] += b[i];
        return a;
    }
    case CoeffExpr::Kind::Sub: {
        Coeffs a = expand_node(n->lhs.get(), center, order);
        Coeffs b = expand_node(n->rhs.get(), center, order);
        for (size_t i = 0; i < len; ++i)
            a[i] -= b[i];
        return a;
    }
    case CoeffExpr::Kind::Mul:
        return cauchy_mul(expand_node(n->lhs.get(), center, order),
                          expand_node(n->rhs.get(), center, order));
    case CoeffExpr::Kind::Div:
        return cauchy_div(expand_node(n->lhs.get(), center, order),
                          expand_node(n->rhs.get(), center, order));
    case CoeffExpr::Kind::Sin: {
        Coeffs s, c;
        sincos_series(expand_node(n->lhs.get(), center, order), s, c);
        return s;
    }
    case CoeffExpr::Kind::Cos: {
        Coeffs s, c;
        sincos_series(expand_node(n->lhs.get(), center, order), s, c);
        return c;
    }
    case CoeffExpr::Kind::Exp:
        return exp_series(expand_node(n->lhs.get(), center, order));
    case CoeffExpr::Kind::Sqrt:
        return sqrt_series(expand_node(n->lhs.get(), center, order));
    case CoeffExpr::Kind::Pow:
        return ipow_series(expand_node(n->lhs.get(), center, order), n->exponent);
    }
    throw Error("unreachable expression kind");
}

} // namespace

UniSeries expand(const CoeffExpr& expr, double center, int order) {
    if (order < 0)
        throw OrderError("expansion order must be nonnegative");
    // Surfaces poles/branch points at the center before any series work.
    (void)expr.eval(center);
    return UniSeries(center, expand_node(expr.node_.get(), center, order));
}

} // namespace psk
