#include "grad/tensor.hpp"

#include <cmath>
#include <cstring>
#include <unordered_set>

#include "core/error.hpp"

namespace mvb::grad {

namespace {

size_t numel(const std::vector<int>& shape) {
    size_t n = 1;
    for (int d : shape) {
        if (d <= 0) fail_param("tensor dims must be positive");
        n *= static_cast<size_t>(d);
    }
    return n;
}

std::shared_ptr<Node> fresh(std::vector<int> shape, const char* op,
                            std::initializer_list<Tensor> parents) {
    auto n = std::make_shared<Node>();
    n->shape = std::move(shape);
    n->v.assign(numel(n->shape), 0.0);
    n->op = op;
    for (const Tensor& p : parents) {
        if (!p.defined()) fail_param(std::string(op) + ": undefined input tensor");
        if (p.node()->requires_grad) n->requires_grad = true;
    }
    if (n->requires_grad) n->parents.assign(parents);
    return n;
}

Node& parent(Node& self, size_t i) { return *self.parents[i].node(); }

// Accumulate src into p's grad buffer if p participates in the backward pass.
void accumulate(Node& p, const std::vector<double>& src) {
    if (!p.requires_grad) return;
    p.ensure_grad();
    for (size_t i = 0; i < src.size(); ++i) p.g[i] += src[i];
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape()) fail_param(std::string(op) + ": shape mismatch");
}

void check_matrix(const Tensor& t, const char* op) {
    if (t.shape().size() != 2) fail_param(std::string(op) + ": expected a matrix");
}

// C(n,m) += A(n,k) * B(k,m)
void mm_nn_acc(const double* a, const double* b, double* c, int n, int k, int m) {
    for (int i = 0; i < n; ++i) {
        const double* arow = a + static_cast<size_t>(i) * k;
        double* crow = c + static_cast<size_t>(i) * m;
        for (int p = 0; p < k; ++p) {
            const double aip = arow[p];
            if (aip == 0.0) continue;
            const double* brow = b + static_cast<size_t>(p) * m;
            for (int j = 0; j < m; ++j) crow[j] += aip * brow[j];
        }
    }
}

// C(n,m) += A(n,k) * B(m,k)^T
void mm_nt_acc(const double* a, const double* b, double* c, int n, int k, int m) {
    for (int i = 0; i < n; ++i) {
        const double* arow = a + static_cast<size_t>(i) * k;
        double* crow = c + static_cast<size_t>(i) * m;
        for (int j = 0; j < m; ++j) {
            const double* brow = b + static_cast<size_t>(j) * k;
            double acc = 0.0;
            for (int p = 0; p < k; ++p) acc += arow[p] * brow[p];
            crow[j] += acc;
        }
    }
}

// C(k,m) += A(n,k)^T * B(n,m)
void mm_tn_acc(const double* a, const double* b, double* c, int n, int k, int m) {
    for (int i = 0; i < n; ++i) {
        const double* arow = a + static_cast<size_t>(i) * k;
        const double* brow = b + static_cast<size_t>(i) * m;
        for (int p = 0; p < k; ++p) {
            const double aip = arow[p];
            if (aip == 0.0) continue;
            double* crow = c + static_cast<size_t>(p) * m;
            for (int j = 0; j < m; ++j) crow[j] += aip * brow[j];
        }
    }
}

double sigmoid_scalar(double x) {
    if (x >= 0.0) {
        const double e = std::exp(-x);
        return 1.0 / (1.0 + e);
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
}

double softplus_scalar(double x) {
    if (x > 30.0) return x;
    if (x < -30.0) return std::exp(x);
    return std::log1p(std::exp(x));
}

constexpr double kInvSqrt2 = 0.7071067811865475244;
constexpr double kInvSqrt2Pi = 0.3989422804014326779;

// Elementwise helper: forward map + derivative-from-(x,y) for the backward.
template <typename Fwd, typename Dfn>
Tensor unary_op(const Tensor& a, const char* name, Fwd fwd, Dfn dfn) {
    auto n = fresh(a.shape(), name, {a});
    const auto& x = a.data();
    for (size_t i = 0; i < x.size(); ++i) n->v[i] = fwd(x[i]);
    if (n->requires_grad) {
        n->backprop = [dfn](Node& self) {
            Node& p = parent(self, 0);
            if (!p.requires_grad) return;
            p.ensure_grad();
            for (size_t i = 0; i < self.g.size(); ++i)
                p.g[i] += self.g[i] * dfn(p.v[i], self.v[i]);
        };
    }
    return Tensor(n);
}

}  // namespace

Tensor Tensor::zeros(std::vector<int> shape, bool requires_grad) {
    auto n = std::make_shared<Node>();
    n->shape = std::move(shape);
    n->v.assign(numel(n->shape), 0.0);
    n->requires_grad = requires_grad;
    return Tensor(n);
}

Tensor Tensor::full(std::vector<int> shape, double value, bool requires_grad) {
    Tensor t = zeros(std::move(shape), requires_grad);
    for (double& x : t.data()) x = value;
    return t;
}

Tensor Tensor::from(std::vector<int> shape, std::vector<double> data, bool requires_grad) {
    Tensor t = zeros(std::move(shape), requires_grad);
    if (data.size() != t.size()) fail_param("tensor data size does not match shape");
    t.data() = std::move(data);
    return t;
}

Tensor Tensor::scalar(double v, bool requires_grad) {
    return from({1}, {v}, requires_grad);
}

const std::vector<int>& Tensor::shape() const { return node_->shape; }
size_t Tensor::size() const { return node_->v.size(); }
std::vector<double>& Tensor::data() { return node_->v; }
const std::vector<double>& Tensor::data() const { return node_->v; }
std::vector<double>& Tensor::grad() {
    node_->ensure_grad();
    return node_->g;
}
bool Tensor::requires_grad() const { return node_->requires_grad; }

double Tensor::value() const {
    if (size() != 1) fail_param("value() called on a non-scalar tensor");
    return node_->v[0];
}

const char* op_name(const Tensor& t) { return t.node()->op; }

void backward(const Tensor& loss) {
    if (!loss.defined() || loss.size() != 1)
        fail_param("backward expects a defined scalar loss");
    // Post-order DFS, then walk the order reversed.
    std::vector<Node*> order;
    std::unordered_set<Node*> seen;
    std::vector<std::pair<Node*, size_t>> stack;
    stack.push_back({loss.node(), 0});
    seen.insert(loss.node());
    while (!stack.empty()) {
        auto& [node, idx] = stack.back();
        if (idx < node->parents.size()) {
            Node* next = node->parents[idx++].node();
            if (seen.insert(next).second) stack.push_back({next, 0});
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }
    for (Node* n : order)
        if (n->requires_grad) n->g.assign(n->v.size(), 0.0);
    Node* root = loss.node();
    if (!root->requires_grad) return;  // constant graph, nothing to do
    root->g[0] = 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* n = *it;
        if (n->backprop && n->requires_grad) n->backprop(*n);
    }
}

void zero_grad(std::vector<Tensor>& params) {
    for (Tensor& p : params) p.node()->g.assign(p.size(), 0.0);
}

Tensor add(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "add");
    auto n = fresh(a.shape(), "add", {a, b});
    const auto& x = a.data();
    const auto& y = b.data();
    for (size_t i = 0; i < x.size(); ++i) n->v[i] = x[i] + y[i];
    if (n->requires_grad) {
        n->backprop = [](Node& self) {
            accumulate(parent(self, 0), self.g);
            accumulate(parent(self, 1), self.g);
        };
    }
    return Tensor(n);
}

Tensor sub(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "sub");
    auto n = fresh(a.shape(), "sub", {a, b});
    const auto& x = a.data();
    const auto& y = b.data();
    for (size_t i = 0; i < x.size(); ++i) n->v[i] = x[i] - y[i];
    if (n->requires_grad) {
        n->backprop = [](Node& self) {
            accumulate(parent(self, 0), self.g);
            Node& p = parent(self, 1);
            if (!p.requires_grad) return;
            p.ensure_grad();
            for (size_t i = 0; i < self.g.size(); ++i) p.g[i] -= self.g[i];
        };
    }
    return Tensor(n);
}

Tensor mul(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "mul");
    auto n = fresh(a.shape(), "mul", {a, b});
    const auto& x = a.data();
    const auto& y = b.data();
    for (size_t i = 0; i < x.size(); ++i) n->v[i] = x[i] * y[i];
    if (n->requires_grad) {
        n->backprop = [](Node& self) {
            Node& pa = parent(self, 0);
            Node& pb = parent(self, 1);
            if (pa.requires_grad) {
                pa.ensure_grad();
                for (size_t i = 0; i < self.g.size(); ++i) pa.g[i] += self.g[i] * pb.v[i];
            }
            if (pb.requires_grad) {
                pb.ensure_grad();
                for (size_t i = 0; i < self.g.size(); ++i) pb.g[i] += self.g[i] * pa.v[i];
            }
        };
    }
    return Tensor(n);
}

Tensor divide(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "divide");
    auto n = fresh(a.shape(), "divide", {a, b});
    const auto& x = a.data();
    const auto& y = b.data();
    for (size_t i = 0; i < x.size(); ++i) n->v[i] = x[i] / y[i];
    if (n->requires_grad) {
        n->backprop = [](Node& self) {
            Node& pa = parent(self, 0);
            Node& pb = parent(self, 1);
            if (pa.requires_grad) {
                pa.ensure_grad();
                for (size_t i = 0; i < self.g.size(); ++i) pa.g[i] += self.g[i] / pb.v[i];
            }
            if (pb.requires_grad) {
                pb.ensure_grad();
                for (size_t i = 0; i < self.g.size(); ++i)
                    pb.g[i] -= self.g[i] * self.v[i] / pb.v[i];
            }
        };
    }
    return Tensor(n);
}

Tensor scale(const Tensor& a, double c) {
    return unary_op(a, "scale",
                    [c](double x) { return x * c; },
                    [c](double, double) { return c; });
}

Tensor add_scalar(const Tensor& a, double c) {
    return unary_op(a, "add_scalar",
                    [c](double x) { return x + c; },
                    [](double, double) { return 1.0; });
}

Tensor neg(const Tensor& a) { return scale(a, -1.0); }

Tensor sigmoid(const Tensor& a) {
    return unary_op(a, "sigmoid",
                    [](double x) { return sigmoid_scalar(x); },
                    [](double, double y) { return y * (1.0 - y); });
}

Tensor tanh_t(const Tensor& a) {
    return unary_op(a, "tanh",
                    [](double x) { return std::tanh(x); },
                    [](double, double y) { return 1.0 - y * y; });
}

Tensor softplus(const Tensor& a) {
    return unary_op(a, "softplus",
                    [](double x) { return softplus_scalar(x); },
                    [](double x, double) { return sigmoid_scalar(x); });
}

Tensor gelu(const Tensor& a) {
    return unary_op(a, "gelu",
                    [](double x) { return 0.5 * x * (1.0 + std::erf(x * kInvSqrt2)); },
                    [](double x, double) {
                        const double cdf = 0.5 * (1.0 + std::erf(x * kInvSqrt2));
                        return cdf + x * kInvSqrt2Pi * std::exp(-0.5 * x * x);
                    });
}

Tensor sqrt_t(const Tensor& a) {
    return unary_op(a, "sqrt",
                    [](double x) { return std::sqrt(x); },
                    [](double, double y) { return 0.5 / std::max(y, 1e-150); });
}

Tensor abs_smooth(const Tensor& a) {
    return unary_op(a, "abs_smooth",
                    [](double x) { return std::sqrt(x * x + 1e-12); },
                    [](double x, double y) { return x / y; });
}

Tensor sum(const Tensor& a) {
    auto n = fresh({1}, "sum", {a});
    double acc = 0.0;
    for (double x : a.data()) acc += x;
    n->v[0] = acc;
    if (n->requires_grad) {
        n->backprop = [](Node& self) {
            Node& p = parent(self, 0);
            if (!p.requires_grad) return;
            p.ensure_grad();
            const double g = self.g[0];
            for (double& d : p.g) d += g;
        };
    }
    return Tensor(n);
}

Tensor mean(const Tensor& a) {
    auto n = fresh({1}, "mean", {a});
    double acc = 0.0;
    for (double x : a.data()) acc += x;
    n->v[0] = acc / static_cast<double>(a.size());
    if (n->requires_grad) {
        n->backprop = [](Node& self) {
            Node& p = parent(self, 0);
            if (!p.requires_grad) return;
            p.ensure_grad();
            const double g = self.g[0] / static_cast<double>(p.v.size());
            for (double& d : p.g) d += g;
        };
    }
    return Tensor(n);
}

Tensor mse(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "mse");
    auto n = fresh({1}, "mse", {a, b});
    const auto& x = a.data();
    const auto& y = b.data();
    double acc = 0.0;
    for (size_t i = 0; i < x.size(); ++i) {
        const double d = x[i] - y[i];
        acc += d * d;
    }
    n->v[0] = acc / static_cast<double>(x.size());
    if (n->requires_grad) {
        n->backprop = [](Node& self) {
            Node& pa = parent(self, 0);
            Node& pb = parent(self, 1);
            const double c = 2.0 * self.g[0] / static_cast<double>(pa.v.size());
            if (pa.requires_grad) {
                pa.ensure_grad();
                for (size_t i = 0; i < pa.v.size(); ++i)
                    pa.g[i] += c * (pa.v[i] - pb.v[i]);
            }
            if (pb.requires_grad) {
                pb.ensure_grad();
                for (size_t i = 0; i < pb.v.size(); ++i)
                    pb.g[i] -= c * (pa.v[i] - pb.v[i]);
            }
        };
    }
    return Tensor(n);
}

Tensor dot(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "dot");
    auto n = fresh({1}, "dot", {a, b});
    const auto& x = a.data();
    const auto& y = b.data();
    double acc = 0.0;
    for (size_t i = 0; i < x.size(); ++i) acc += x[i] * y[i];
    n->v[0] = acc;
    if (n->requires_grad) {
        n->backprop = [](Node& self) {
            Node& pa = parent(self, 0);
            Node& pb = parent(self, 1);
            const double g = self.g[0];
            if (pa.requires_grad) {
                pa.ensure_grad();
                for (size_t i = 0; i < pa.v.size(); ++i) pa.g[i] += g * pb.v[i];
            }
            if (pb.requires_grad) {
                pb.ensure_grad();
                for (size_t i = 0; i < pb.v.size(); ++i) pb.g[i] += g * pa.v[i];
            }
        };
    }
    return Tensor(n);
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    check_matrix(a, "matmul");
    check_matrix(b, "matmul");
    const int n_ = a.shape()[0], k_ = a.shape()[1], m_ = b.shape()[1];
    if (b.shape()[0] != k_) fail_param("matmul: inner dims disagree");
    auto n = fresh({n_, m_}, "matmul", {a, b});
    mm_nn_acc(a.data().data(), b.data().data(), n->v.data(), n_, k_, m_);
    if (n->requires_grad) {
        n->backprop = [n_, k_, m_](Node& self) {
            Node& pa = parent(self, 0);
            Node& pb = parent(self, 1);
            if (pa.requires_grad) {
                pa.ensure_grad();
                mm_nt_acc(self.g.data(), pb.v.data(), pa.g.data(), n_, m_, k_);
            }
            if (pb.requires_grad) {
                pb.ensure_grad();
                mm_tn_acc(pa.v.data(), self.g.data(), pb.g.data(), n_, k_, m_);
            }
        };
    }
    return Tensor(n);
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
    check_matrix(a, "matmul_nt");
    check_matrix(b, "matmul_nt");
    const int n_ = a.shape()[0], k_ = a.shape()[1], m_ = b.shape()[0];
    if (b.shape()[1] != k_) fail_param("matmul_nt: inner dims disagree");
    auto n = fresh({n_, m_}, "matmul_nt", {a, b});
    mm_nt_acc(a.data().data(), b.data().data(), n->v.data(), n_, k_, m_);
    if (n->requires_grad) {
        n->backprop = [n_, k_, m_](Node& self) {
            Node& pa = parent(self, 0);
            Node& pb = parent(self, 1);
            if (pa.requires_grad) {
                pa.ensure_grad();
                mm_nn_acc(self.g.data(), pb.v.data(), pa.g.data(), n_, m_, k_);
            }
            if (pb.requires_grad) {
                pb.ensure_grad();
                mm_tn_acc(self.g.data(), pa.v.data(), pb.g.data(), n_, m_, k_);
            }
        };
    }
    return Tensor(n);
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& bias) {
    check_matrix(x, "linear");
    check_matrix(w, "linear");
    const int n_ = x.shape()[0], k_ = x.shape()[1], m_ = w.shape()[1];
    if (w.shape()[0] != k_) fail_param("linear: weight rows must match input cols");
    if (bias.shape() != std::vector<int>{m_}) fail_param("linear: bias size mismatch");
    auto n = fresh({n_, m_}, "linear", {x, w, bias});
    mm_nn_acc(x.data().data(), w.data().data(), n->v.data(), n_, k_, m_);
    const auto& b = bias.data();
    for (int i = 0; i < n_; ++i)
        for (int j = 0; j < m_; ++j) n->v[static_cast<size_t>(i) * m_ + j] += b[j];
    if (n->requires_grad) {
        n->backprop = [n_, k_, m_](Node& self) {
            Node& px = parent(self, 0);
            Node& pw = parent(self, 1);
            Node& pb = parent(self, 2);
            if (px.requires_grad) {
                px.ensure_grad();
                mm_nt_acc(self.g.data(), pw.v.data(), px.g.data(), n_, m_, k_);
            }
            if (pw.requires_grad) {
                pw.ensure_grad();
                mm_tn_acc(px.v.data(), self.g.data(), pw.g.data(), n_, k_, m_);
            }
            if (pb.requires_grad) {
                pb.ensure_grad();
                for (int i = 0; i < n_; ++i)
                    for (int j = 0; j < m_; ++j)
                        pb.g[j] += self.g[static_cast<size_t>(i) * m_ + j];
            }
        };
    }
    return Tensor(n);
}

Tensor add_rowvec(const Tensor& x, const Tensor& v) {
    check_matrix(x, "add_rowvec");
    const int n_ = x.shape()[0], m_ = x.shape()[1];
    if (v.shape() != std::vector<int>{m_}) fail_param("add_rowvec: vector size mismatch");
    auto n = fresh({n_, m_}, "add_rowvec", {x, v});
    const auto& xd = x.data();
    const auto& vd = v.data();
    for (int i = 0; i < n_; ++i)
        for (int j = 0; j < m_; ++j) {
            const size_t idx = static_cast<size_t>(i) * m_ + j;
            n->v[idx] = xd[idx] + vd[j];
        }
    if (n->requires_grad) {
        n->backprop = [n_, m_](Node& self) {
            accumulate(parent(self, 0), self.g);
            Node& pv = parent(self, 1);
            if (!pv.requires_grad) return;
            pv.ensure_grad();
            for (int i = 0; i < n_; ++i)
                for (int j = 0; j < m_; ++j)
                    pv.g[j] += self.g[static_cast<size_t>(i) * m_ + j];
        };
    }
    return Tensor(n);
}

Tensor slice_cols(const Tensor& x, int first, int count) {
    check_matrix(x, "slice_cols");
    const int n_ = x.shape()[0], m_ = x.shape()[1];
    if (first < 0 || count <= 0 || first + count > m_)
        fail_param("slice_cols: range out of bounds");
    auto n = fresh({n_, count}, "slice_cols", {x});
    const auto& xd = x.data();
    for (int i = 0; i < n_; ++i)
        std::memcpy(n->v.data() + static_cast<size_t>(i) * count,
                    xd.data() + static_cast<size_t>(i) * m_ + first,
                    sizeof(double) * static_cast<size_t>(count));
    if (n->requires_grad) {
        n->backprop = [n_, m_, first, count](Node& self) {
            Node& p = parent(self, 0);
            if (!p.requires_grad) return;
            p.ensure_grad();
            for (int i = 0; i < n_; ++i)
                for (int j = 0; j < count; ++j)
                    p.g[static_cast<size_t>(i) * m_ + first + j] +=
                        self.g[static_cast<size_t>(i) * count + j];
        };
    }
    return Tensor(n);
}

Tensor concat_cols(const std::vector<Tensor>& xs) {
    if (xs.empty()) fail_param("concat_cols: empty input list");
    const int n_ = xs[0].shape()[0];
    int total = 0;
    for (const Tensor& t : xs) {
        check_matrix(t, "concat_cols");
        if (t.shape()[0] != n_) fail_param("concat_cols: row counts disagree");
        total += t.shape()[1];
    }
    auto n = std::make_shared<Node>();
    n->shape = {n_, total};
    n->v.assign(numel(n->shape), 0.0);
    n->op = "concat_cols";
    for (const Tensor& t : xs)
        if (t.node()->requires_grad) n->requires_grad = true;
    if (n->requires_grad) n->parents = xs;
    int off = 0;
    for (const Tensor& t : xs) {
        const int w = t.shape()[1];
        const auto& td = t.data();
        for (int i = 0; i < n_; ++i)
            std::memcpy(n->v.data() + static_cast<size_t>(i) * total + off,
                        td.data() + static_cast<size_t>(i) * w,
                        sizeof(double) * static_cast<size_t>(w));
        off += w;
    }
    if (n->requires_grad) {
        n->backprop = [n_, total](Node& self) {
            int off2 = 0;
            for (auto& pt : self.parents) {
                Node& p = *pt.node();
                const int w = p.shape[1];
                if (p.requires_grad) {
                    p.ensure_grad();
                    for (int i = 0; i < n_; ++i)
                        for (int j = 0; j < w; ++j)
                            p.g[static_cast<size_t>(i) * w + j] +=
                                self.g[static_cast<size_t>(i) * total + off2 + j];
                }
                off2 += w;
            }
        };
    }
    return Tensor(n);
}

Tensor softmax_rows(const Tensor& x) {
    check_matrix(x, "softmax_rows");
    const int n_ = x.shape()[0], m_ = x.shape()[1];
    auto n = fresh({n_, m_}, "softmax_rows", {x});
    const auto& xd = x.data();
    for (int i = 0; i < n_; ++i) {
        const double* row = xd.data() + static_cast<size_t>(i) * m_;
        double* out = n->v.data() + static_cast<size_t>(i) * m_;
        double mx = row[0];
        for (int j = 1; j < m_; ++j) mx = std::max(mx, row[j]);
        double z = 0.0;
        for (int j = 0; j < m_; ++j) {
            out[j] = std::exp(row[j] - mx);
            z += out[j];
        }
        for (int j = 0; j < m_; ++j) out[j] /= z;
    }
    if (n->requires_grad) {
        n->backprop = [n_, m_](Node& self) {
            Node& p = parent(self, 0);
            if (!p.requires_grad) return;
            p.ensure_grad();
            for (int i = 0; i < n_; ++i) {
                const double* y = self.v.data() + static_cast<size_t>(i) * m_;
                const double* gy = self.g.data() + static_cast<size_t>(i) * m_;
                double inner = 0.0;
                for (int j = 0; j < m_; ++j) inner += gy[j] * y[j];
                double* gx = p.g.data() + static_cast<size_t>(i) * m_;
                for (int j = 0; j < m_; ++j) gx[j] += y[j] * (gy[j] - inner);
            }
        };
    }
    return Tensor(n);
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
    check_matrix(x, "layer_norm");
    const int n_ = x.shape()[0], m_ = x.shape()[1];
    if (gain.shape() != std::vector<int>{m_} || bias.shape() != std::vector<int>{m_})
        fail_param("layer_norm: gain/bias size mismatch");
    auto n = fresh({n_, m_}, "layer_norm", {x, gain, bias});
    const auto& xd = x.data();
    const auto& gd = gain.data();
    const auto& bd = bias.data();
    std::vector<double> xhat(static_cast<size_t>(n_) * m_);
    std::vector<double> invstd(n_);
    for (int i = 0; i < n_; ++i) {
        const double* row = xd.data() + static_cast<size_t>(i) * m_;
        double mu = 0.0;
        for (int j = 0; j < m_; ++j) mu += row[j];
        mu /= m_;
        double var = 0.0;
        for (int j = 0; j < m_; ++j) {
            const double d = row[j] - mu;
            var += d * d;
        }
        var /= m_;
        const double is = 1.0 / std::sqrt(var + eps);
        invstd[i] = is;
        for (int j = 0; j < m_; ++j) {
            const size_t idx = static_cast<size_t>(i) * m_ + j;
            xhat[idx] = (row[j] - mu) * is;
            n->v[idx] = xhat[idx] * gd[j] + bd[j];
        }
    }
    if (n->requires_grad) {
        n->backprop = [n_, m_, xhat = std::move(xhat), invstd = std::move(invstd)](Node& self) {
            Node& px = parent(self, 0);
            Node& pg = parent(self, 1);
            Node& pb = parent(self, 2);
            if (pg.requires_grad) {
                pg.ensure_grad();
                for (int i = 0; i < n_; ++i)
                    for (int j = 0; j < m_; ++j) {
                        const size_t idx = static_cast<size_t>(i) * m_ + j;
                        pg.g[j] += self.g[idx] * xhat[idx];
                    }
            }
            if (pb.requires_grad) {
                pb.ensure_grad();
                for (int i = 0; i < n_; ++i)
                    for (int j = 0; j < m_; ++j)
                        pb.g[j] += self.g[static_cast<size_t>(i) * m_ + j];
            }
            if (px.requires_grad) {
                px.ensure_grad();
                const auto& gd2 = pg.v;
                for (int i = 0; i < n_; ++i) {
                    const double* gy = self.g.data() + static_cast<size_t>(i) * m_;
                    const double* xh = xhat.data() + static_cast<size_t>(i) * m_;
                    double s1 = 0.0, s2 = 0.0;
                    for (int j = 0; j < m_; ++j) {
                        const double dxh = gy[j] * gd2[j];
                        s1 += dxh;
                        s2 += dxh * xh[j];
                    }
                    s1 /= m_;
                    s2 /= m_;
                    double* gx = px.g.data() + static_cast<size_t>(i) * m_;
                    for (int j = 0; j < m_; ++j) {
                        const double dxh = gy[j] * gd2[j];
                        gx[j] += invstd[i] * (dxh - s1 - xh[j] * s2);
                    }
                }
            }
        };
    }
    return Tensor(n);
}

Tensor luma(const Tensor& rgb) {
    const auto& sh = rgb.shape();
    if (sh.size() != 3 || sh[2] != 3) fail_param("luma: expected an (h,w,3) tensor");
    const int h = sh[0], w = sh[1];
    auto n = fresh({h, w}, "luma", {rgb});
    const auto& x = rgb.data();
    for (int i = 0; i < h * w; ++i) {
        const double* px = x.data() + static_cast<size_t>(i) * 3;
        n->v[i] = 0.299 * px[0] + 0.587 * px[1] + 0.114 * px[2];
    }
    if (n->requires_grad) {
        n->backprop = [h, w](Node& self) {
            Node& p = parent(self, 0);
            if (!p.requires_grad) return;
            p.ensure_grad();
            for (int i = 0; i < h * w; ++i) {
                const double g = self.g[i];
                double* gp = p.g.data() + static_cast<size_t>(i) * 3;
                gp[0] += 0.299 * g;
                gp[1] += 0.587 * g;
                gp[2] += 0.114 * g;
            }
        };
    }
    return Tensor(n);
}

Tensor avgpool2(const Tensor& x) { return downsample_area(x, 2); }

Tensor downsample_area(const Tensor& x, int factor) {
    const auto& sh = x.shape();
    if (sh.size() != 2) fail_param("downsample_area: expected an (h,w) tensor");
    if (factor <= 0 || sh[0] % factor != 0 || sh[1] % factor != 0)
        fail_param("downsample_area: dims must be divisible by the factor");
    const int h = sh[0], w = sh[1], oh = h / factor, ow = w / factor;
    auto n = fresh({oh, ow}, "downsample_area", {x});
    const auto& xd = x.data();
    const double inv = 1.0 / (static_cast<double>(factor) * factor);
    for (int i = 0; i < oh; ++i)
        for (int j = 0; j < ow; ++j) {
            double acc = 0.0;
            for (int a = 0; a < factor; ++a)
                for (int b = 0; b < factor; ++b)
                    acc += xd[static_cast<size_t>(i * factor + a) * w + j * factor + b];
            n->v[static_cast<size_t>(i) * ow + j] = acc * inv;
        }
    if (n->requires_grad) {
        n->backprop = [h, w, oh, ow, factor, inv](Node& self) {
            (void)h;
            Node& p = parent(self, 0);
            if (!p.requires_grad) return;
            p.ensure_grad();
            for (int i = 0; i < oh; ++i)
                for (int j = 0; j < ow; ++j) {
                    const double g = self.g[static_cast<size_t>(i) * ow + j] * inv;
                    for (int a = 0; a < factor; ++a)
                        for (int b = 0; b < factor; ++b)
                            p.g[static_cast<size_t>(i * factor + a) * w + j * factor + b] += g;
                }
        };
    }
    return Tensor(n);
}

Tensor conv_sep_valid(const Tensor& x, const std::vector<double>& kernel) {
    const auto& sh = x.shape();
    if (sh.size() != 2) fail_param("conv_sep_valid: expected an (h,w) tensor");
    const int k = static_cast<int>(kernel.size());
    if (k < 1 || k % 2 == 0) fail_param("conv_sep_valid: kernel length must be odd");
    const int h = sh[0], w = sh[1], oh = h - k + 1, ow = w - k + 1;
    if (oh < 1 || ow < 1) fail_param("conv_sep_valid: kernel larger than image");
    auto n = fresh({oh, ow}, "conv_sep_valid", {x});
    const auto& xd = x.data();
    // horizontal pass into a scratch buffer, then vertical
    std::vector<double> t(static_cast<size_t>(h) * ow, 0.0);
    for (int i = 0; i < h; ++i)
        for (int j = 0; j < ow; ++j) {
            double acc = 0.0;
            for (int u = 0; u < k; ++u) acc += xd[static_cast<size_t>(i) * w + j + u] * kernel[u];
            t[static_cast<size_t>(i) * ow + j] = acc;
        }
    for (int i = 0; i < oh; ++i)
        for (int j = 0; j < ow; ++j) {
            double acc = 0.0;
            for (int v = 0; v < k; ++v) acc += t[static_cast<size_t>(i + v) * ow + j] * kernel[v];
            n->v[static_cast<size_t>(i) * ow + j] = acc;
        }
    if (n->requires_grad) {
        n->backprop = [h, w, oh, ow, k, kernel](Node& self) {
            Node& p = parent(self, 0);
            if (!p.requires_grad) return;
            p.ensure_grad();
            std::vector<double> dt(static_cast<size_t>(h) * ow, 0.0);
            for (int i = 0; i < oh; ++i)
                for (int j = 0; j < ow; ++j) {
                    const double g = self.g[static_cast<size_t>(i) * ow + j];
                    for (int v = 0; v < k; ++v)
                        dt[static_cast<size_t>(i + v) * ow + j] += g * kernel[v];
                }
            for (int i = 0; i < h; ++i)
                for (int j = 0; j < ow; ++j) {
                    const double g = dt[static_cast<size_t>(i) * ow + j];
                    if (g == 0.0) continue;
                    for (int u = 0; u < k; ++u)
                        p.g[static_cast<size_t>(i) * w + j + u] += g * kernel[u];
                }
        };
    }
    return Tensor(n);
}

Tensor conv3x3_valid(const Tensor& x, const std::array<double, 9>& kern) {
    const auto& sh = x.shape();
    if (sh.size() != 2) fail_param("conv3x3_valid: expected an (h,w) tensor");
    const int h = sh[0], w = sh[1], oh = h - 2, ow = w - 2;
    if (oh < 1 || ow < 1) fail_param("conv3x3_valid: image too small");
    auto n = fresh({oh, ow}, "conv3x3_valid", {x});
    const auto& xd = x.data();
    for (int i = 0; i < oh; ++i)
        for (int j = 0; j < ow; ++j) {
            double acc = 0.0;
            for (int a = 0; a < 3; ++a)
                for (int b = 0; b < 3; ++b)
                    acc += xd[static_cast<size_t>(i + a) * w + j + b] * kern[a * 3 + b];
            n->v[static_cast<size_t>(i) * ow + j] = acc;
        }
    if (n->requires_grad) {
        n->backprop = [w, oh, ow, kern](Node& self) {
            Node& p = parent(self, 0);
            if (!p.requires_grad) return;
            p.ensure_grad();
            for (int i = 0; i < oh; ++i)
                for (int j = 0; j < ow; ++j) {
                    const double g = self.g[static_cast<size_t>(i) * ow + j];
                    if (g == 0.0) continue;
                    for (int a = 0; a < 3; ++a)
                        for (int b = 0; b < 3; ++b)
                            p.g[static_cast<size_t>(i + a) * w + j + b] += g * kern[a * 3 + b];
                }
        };
    }
    return Tensor(n);
}

}  // namespace mvb::grad
