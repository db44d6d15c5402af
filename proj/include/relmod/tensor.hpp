#ifndef RELMOD_TENSOR_HPP
#define RELMOD_TENSOR_HPP

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace relmod {

class Tensor;
using TensorPtr = std::shared_ptr<Tensor>;

/// Boolean visibility mask over a matrix. 1 = visible, 0 = masked out.
struct Mask {
    int rows = 0;
    int cols = 0;
    std::vector<uint8_t> keep;

    static Mask all(int rows, int cols);
    /// Same length-`cols` row replicated across `rows` rows.
    static Mask broadcast_row(const std::vector<uint8_t>& row, int rows);

    bool at(int r, int c) const { return keep[static_cast<size_t>(r) * cols + c] != 0; }
    bool empty() const { return keep.empty(); }
};

/// Dense row-major tensor participating in a recorded computation.
/// Values are doubles; `grad` has the same layout and is allocated for
/// trainable leaves and for any node reachable from one while gradient
/// recording is enabled.
class Tensor {
public:
    std::vector<int> shape;
    std::vector<double> val;
    std::vector<double> grad;
    bool requires_grad = false;
    std::string name;

    // Reverse-mode linkage. `backprop` reads this->grad and accumulates
    // into the parents' grads.
    std::vector<TensorPtr> parents;
    std::function<void()> backprop;

    static TensorPtr zeros(std::vector<int> shape, bool requires_grad = false);
    static TensorPtr constant(std::vector<int> shape, std::vector<double> values);
    static TensorPtr full(std::vector<int> shape, double fill, bool requires_grad = false);
    static TensorPtr leaf(std::vector<int> shape, std::vector<double> values);
    static TensorPtr scalar(double v);

    int64_t size() const;
    int rows() const;
    int cols() const;
    bool is_matrix() const { return shape.size() == 2; }

    double& at(int r, int c) { return val[static_cast<size_t>(r) * cols() + c]; }
    double at(int r, int c) const { return val[static_cast<size_t>(r) * cols() + c]; }
    /// Value of a one-element tensor.
    double item() const;

    void ensure_grad();
    void zero_grad();
    std::string shape_str() const;
};

std::string shape_to_string(const std::vector<int>& shape);

/// Thread-local gradient recording switch. While disabled, ops compute
/// values but record no graph.
bool grad_enabled();
struct NoGradGuard {
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool prev_;
};

/// Allocates a zero-filled op result and wires parents/requires_grad
/// according to the current grad mode. Exposed so modules can define
/// fused ops with hand-written backward passes.
TensorPtr make_op_node(std::vector<int> shape, std::vector<TensorPtr> parents);

// ---------------------------------------------------------------------------
// Differentiable primitives. All matrix arguments are 2-D.
// ---------------------------------------------------------------------------

TensorPtr matmul(const TensorPtr& a, const TensorPtr& b);
TensorPtr transpose(const TensorPtr& x);
TensorPtr add(const TensorPtr& a, const TensorPtr& b);
/// r-by-c matrix plus a 1-by-c bias row broadcast over rows.
TensorPtr add_row_broadcast(const TensorPtr& m, const TensorPtr& bias);
TensorPtr sub(const TensorPtr& a, const TensorPtr& b);
TensorPtr mul(const TensorPtr& a, const TensorPtr& b);
TensorPtr scale(const TensorPtr& x, double c);
TensorPtr tanh_op(const TensorPtr& x);
TensorPtr sigmoid_op(const TensorPtr& x);
TensorPtr relu_op(const TensorPtr& x);
TensorPtr concat_cols(const std::vector<TensorPtr>& xs);
TensorPtr concat_rows(const std::vector<TensorPtr>& xs);
TensorPtr slice_rows(const TensorPtr& x, int row0, int nrows);
/// out[i,:] = x[idx[i],:]; gradients scatter-add back into x.
TensorPtr gather_rows(const TensorPtr& x, const std::vector<int>& idx);
/// Size-preserving shape change.
TensorPtr reshape(const TensorPtr& x, std::vector<int> shape);

/// Row-wise masked softmax. Masked logits get -1e30 added before the
/// softmax and the corresponding outputs are zeroed exactly. Every row
/// must keep at least one visible entry.
TensorPtr softmax_rows(const TensorPtr& x, const Mask& mask);
TensorPtr softmax_rows(const TensorPtr& x);

/// -log softmax(logits)[target] for a 1-by-C logit row. An optional
/// 1-by-C mask removes classes; the target must stay visible.
TensorPtr cross_entropy(const TensorPtr& logits, int target);
TensorPtr cross_entropy(const TensorPtr& logits, int target, const Mask& mask);

TensorPtr frobenius_norm(const TensorPtr& x);
TensorPtr sum_all(const TensorPtr& x);
/// axis 0 sums over rows (-> 1-by-c), axis 1 over columns (-> r-by-1).
TensorPtr sum_axis(const TensorPtr& x, int axis);
/// Weighted sum of rows: (1-by-r) . (r-by-c).
TensorPtr weighted_sum_rows(const TensorPtr& w, const TensorPtr& x);
TensorPtr add_n(const std::vector<TensorPtr>& xs);

/// Reverse-mode pass from a scalar loss: accumulates gradients into every
/// reachable node that requires them. Rejects non-scalar losses.
void backward(const TensorPtr& loss);

// Raw accumulate kernels shared by forward and backward passes.
// C (m-by-n) += A (m-by-k) . B (k-by-n), row-major.
void mm_nn_acc(const double* a, const double* b, double* c, int m, int k, int n);
// C (m-by-k) += A (m-by-n) . B(k-by-n)^T
void mm_nt_acc(const double* a, const double* b, double* c, int m, int n, int k);
// C (k-by-n) += A (m-by-k)^T . B (m-by-n)
void mm_tn_acc(const double* a, const double* b, double* c, int m, int k, int n);

}  // namespace relmod

#endif  // RELMOD_TENSOR_HPP
