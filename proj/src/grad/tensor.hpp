#pragma once

#include <array>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace mvb::grad {

// Small define-by-run reverse-mode engine, double precision throughout.
//
// Tensors are shared handles to graph nodes. Ops allocate fresh nodes; a node
// only retains its parents (and a backward closure) when gradients can flow,
// so pure inference builds no graph. backward() must be called on a scalar.
// Everything is single-threaded and accumulation order is fixed, so gradients
// are bit-reproducible run to run.

struct Node;

class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::shared_ptr<Node> n) : node_(std::move(n)) {}

    static Tensor zeros(std::vector<int> shape, bool requires_grad = false);
    static Tensor full(std::vector<int> shape, double value, bool requires_grad = false);
    static Tensor from(std::vector<int> shape, std::vector<double> data, bool requires_grad = false);
    static Tensor scalar(double v, bool requires_grad = false);

    bool defined() const { return node_ != nullptr; }
    const std::vector<int>& shape() const;
    size_t size() const;
    std::vector<double>& data();
    const std::vector<double>& data() const;
    // Gradient buffer (sized on demand). Valid after backward() for leaves
    // and interior nodes alike.
    std::vector<double>& grad();
    bool requires_grad() const;
    double value() const;  // scalar convenience

    Node* node() const { return node_.get(); }

private:
    std::shared_ptr<Node> node_;
};

struct Node {
    std::vector<int> shape;
    std::vector<double> v;
    std::vector<double> g;
    bool requires_grad = false;
    const char* op = "leaf";
    std::vector<Tensor> parents;
    std::function<void(Node&)> backprop;  // reads this->g, accumulates into parents

    size_t size() const { return v.size(); }
    void ensure_grad() {
        if (g.size() != v.size()) g.assign(v.size(), 0.0);
    }
};

// Reverse pass from a scalar loss. Seeds d(loss)/d(loss) = 1 and accumulates
// into every reachable node's grad buffer (cleared first).
void backward(const Tensor& loss);
void zero_grad(std::vector<Tensor>& params);

// ---- elementwise ----
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor divide(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double c);
Tensor add_scalar(const Tensor& a, double c);
Tensor neg(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor tanh_t(const Tensor& a);
Tensor softplus(const Tensor& a);
Tensor gelu(const Tensor& a);
Tensor sqrt_t(const Tensor& a);            // expects strictly positive input
Tensor abs_smooth(const Tensor& a);        // sqrt(x^2 + 1e-12)

// ---- reductions / losses ----
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
Tensor mse(const Tensor& a, const Tensor& b);
Tensor dot(const Tensor& a, const Tensor& b);

// ---- matrix ops; matrices are (rows, cols) row-major ----
Tensor matmul(const Tensor& a, const Tensor& b);     // (n,k) x (k,m)
Tensor matmul_nt(const Tensor& a, const Tensor& b);  // (n,k) x (m,k)^T
// x (n,k) * w (k,m) + bias (m) broadcast per row
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& bias);
Tensor add_rowvec(const Tensor& x, const Tensor& v);
Tensor slice_cols(const Tensor& x, int first, int count);
Tensor concat_cols(const std::vector<Tensor>& xs);
Tensor softmax_rows(const Tensor& x);
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps = 1e-5);

// ---- image ops; images are (h,w) or (h,w,3) row-major ----
Tensor luma(const Tensor& rgb);                       // (h,w,3) -> (h,w)
Tensor avgpool2(const Tensor& x);                     // (h,w) -> (h/2,w/2), even dims
Tensor downsample_area(const Tensor& x, int factor);  // (h,w) -> (h/f,w/f)
// Separable valid convolution with a fixed (non-trainable) odd-length kernel.
Tensor conv_sep_valid(const Tensor& x, const std::vector<double>& kernel);
// Fixed 3x3 valid convolution (used for gradient filters).
Tensor conv3x3_valid(const Tensor& x, const std::array<double, 9>& k);

const char* op_name(const Tensor& t);

}  // namespace mvb::grad
