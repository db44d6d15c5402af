#include "relmod/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

namespace relmod {

namespace {

thread_local bool g_grad_enabled = true;

constexpr double kMaskFill = -1e30;

void check_matrix(const TensorPtr& t, const char* op) {
    if (!t->is_matrix()) {
        throw std::invalid_argument(std::string(op) + ": expected a matrix, got shape " +
                                    t->shape_str());
    }
}

[[noreturn]] void shape_error(const char* op, const TensorPtr& a, const TensorPtr& b) {
    throw std::invalid_argument(std::string(op) + ": incompatible shapes " + a->shape_str() +
                                " and " + b->shape_str());
}

}  // namespace

std::string shape_to_string(const std::vector<int>& shape) {
    std::ostringstream os;
    os << "[";
    for (size_t i = 0; i < shape.size(); ++i) {
        if (i) os << "x";
        os << shape[i];
    }
    os << "]";
    return os.str();
}

// ---------------------------------------------------------------------------
// Mask
// ---------------------------------------------------------------------------

Mask Mask::all(int rows, int cols) {
    Mask m;
    m.rows = rows;
    m.cols = cols;
    m.keep.assign(static_cast<size_t>(rows) * cols, 1);
    return m;
}

Mask Mask::broadcast_row(const std::vector<uint8_t>& row, int rows) {
    Mask m;
    m.rows = rows;
    m.cols = static_cast<int>(row.size());
    m.keep.resize(static_cast<size_t>(rows) * row.size());
    for (int r = 0; r < rows; ++r) {
        std::copy(row.begin(), row.end(), m.keep.begin() + static_cast<size_t>(r) * row.size());
    }
    return m;
}

// ---------------------------------------------------------------------------
// Tensor
// ---------------------------------------------------------------------------

int64_t Tensor::size() const {
    int64_t n = 1;
    for (int d : shape) n *= d;
    return n;
}

int Tensor::rows() const { return shape.empty() ? 0 : shape[0]; }
int Tensor::cols() const { return shape.size() < 2 ? 1 : shape[1]; }

double Tensor::item() const {
    if (size() != 1) {
        throw std::invalid_argument("item: tensor has " + std::to_string(size()) + " elements");
    }
    return val[0];
}

void Tensor::ensure_grad() {
    if (grad.size() != val.size()) grad.assign(val.size(), 0.0);
}

void Tensor::zero_grad() {
    std::fill(grad.begin(), grad.end(), 0.0);
}

std::string Tensor::shape_str() const { return shape_to_string(shape); }

TensorPtr Tensor::zeros(std::vector<int> shape, bool requires_grad) {
    auto t = std::make_shared<Tensor>();
    t->shape = std::move(shape);
    t->val.assign(static_cast<size_t>(t->size()), 0.0);
    t->requires_grad = requires_grad;
    if (requires_grad) t->ensure_grad();
    return t;
}

TensorPtr Tensor::constant(std::vector<int> shape, std::vector<double> values) {
    auto t = std::make_shared<Tensor>();
    t->shape = std::move(shape);
    if (static_cast<int64_t>(values.size()) != t->size()) {
        throw std::invalid_argument("constant: " + std::to_string(values.size()) +
                                    " values for shape " + t->shape_str());
    }
    t->val = std::move(values);
    return t;
}

TensorPtr Tensor::full(std::vector<int> shape, double fill, bool requires_grad) {
    auto t = zeros(std::move(shape), requires_grad);
    std::fill(t->val.begin(), t->val.end(), fill);
    return t;
}

TensorPtr Tensor::leaf(std::vector<int> shape, std::vector<double> values) {
    auto t = constant(std::move(shape), std::move(values));
    t->requires_grad = true;
    t->ensure_grad();
    return t;
}

TensorPtr Tensor::scalar(double v) { return constant({1, 1}, {v}); }

// ---------------------------------------------------------------------------
// Grad mode
// ---------------------------------------------------------------------------

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : prev_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = prev_; }

TensorPtr make_op_node(std::vector<int> shape, std::vector<TensorPtr> parents) {
    auto t = std::make_shared<Tensor>();
    t->shape = std::move(shape);
    t->val.assign(static_cast<size_t>(t->size()), 0.0);
    bool need = false;
    if (g_grad_enabled) {
        for (const auto& p : parents) need = need || p->requires_grad;
    }
    t->requires_grad = need;
    if (need) {
        t->ensure_grad();
        t->parents = std::move(parents);
    }
    return t;
}

// ---------------------------------------------------------------------------
// Matmul kernels
// ---------------------------------------------------------------------------

void mm_nn_acc(const double* a, const double* b, double* c, int m, int k, int n) {
    for (int i = 0; i < m; ++i) {
        const double* arow = a + static_cast<size_t>(i) * k;
        double* crow = c + static_cast<size_t>(i) * n;
        for (int p = 0; p < k; ++p) {
            const double av = arow[p];
            const double* brow = b + static_cast<size_t>(p) * n;
            for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

void mm_nt_acc(const double* a, const double* b, double* c, int m, int n, int k) {
    for (int i = 0; i < m; ++i) {
        const double* arow = a + static_cast<size_t>(i) * n;
        double* crow = c + static_cast<size_t>(i) * k;
        for (int p = 0; p < k; ++p) {
            const double* brow = b + static_cast<size_t>(p) * n;
            double acc = 0.0;
            for (int j = 0; j < n; ++j) acc += arow[j] * brow[j];
            crow[p] += acc;
        }
    }
}

void mm_tn_acc(const double* a, const double* b, double* c, int m, int k, int n) {
    for (int i = 0; i < m; ++i) {
        const double* arow = a + static_cast<size_t>(i) * k;
        const double* brow = b + static_cast<size_t>(i) * n;
        for (int p = 0; p < k; ++p) {
            const double av = arow[p];
            double* crow = c + static_cast<size_t>(p) * n;
            for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

// ---------------------------------------------------------------------------
// Ops
// ---------------------------------------------------------------------------

TensorPtr matmul(const TensorPtr& a, const TensorPtr& b) {
    check_matrix(a, "matmul");
    check_matrix(b, "matmul");
    if (a->cols() != b->rows()) shape_error("matmul", a, b);
    const int m = a->rows(), k = a->cols(), n = b->cols();
    auto out = make_op_node({m, n}, {a, b});
    mm_nn_acc(a->val.data(), b->val.data(), out->val.data(), m, k, n);
    if (out->requires_grad) {
        Tensor* self = out.get();
        out->backprop = [self, a, b, m, k, n]() {
            if (a->requires_grad) {
                mm_nt_acc(self->grad.data(), b->val.data(), a->grad.data(), m, n, k);
            }
            if (b->requires_grad) {
                mm_tn_acc(a->val.data(), self->grad.data(), b->grad.data(), m, k, n);
            }
        };
    }
    return out;
}

TensorPtr transpose(const TensorPtr& x) {
    check_matrix(x, "transpose");
    const int r = x->rows(), c = x->cols();
    auto out = make_op_node({c, r}, {x});
    for (int i = 0; i < r; ++i) {
        for (int j = 0; j < c; ++j) out->val[static_cast<size_t>(j) * r + i] = x->at(i, j);
    }
    if (out->requires_grad) {
        Tensor* self = out.get();
        out->backprop = [self, x, r, c]() {
            if (!x->requires_grad) return;
            for (int i = 0; i < r; ++i) {
                for (int j = 0; j < c; ++j) {
                    x->grad[static_cast<size_t>(i) * c + j] +=
                        self->grad[static_cast<size_t>(j) * r + i];
                }
            }
        };
    }
    return out;
}

TensorPtr add(const TensorPtr& a, const TensorPtr& b) {
    if (a->shape != b->shape) shape_error("add", a, b);
    auto out = make_op_node(a->shape, {a, b});
    for (size_t i = 0; i < out->val.size(); ++i) out->val[i] = a->val[i] + b->val[i];
    if (out->requires_grad) {
        Tensor* self = out.get();
        out->backprop = [self, a, b]() {
            if (a->requires_grad) {
                for (size_t i = 0; i < self->grad.size(); ++i) a->grad[i] += self->grad[i];
            }
            if (b->requires_grad) {
                for (size_t i = 0; i < self->grad.size(); ++i) b->grad[i] += self->grad[i];
            }
        };
    }
    return out;
}

TensorPtr add_row_broadcast(const TensorPtr& m, const TensorPtr& bias) {
    check_matrix(m, "add_row_broadcast");
    if (bias->rows() != 1 || bias->cols() != m->cols()) shape_error("add_row_broadcast", m, bias);
    const int r = m->rows(), c = m->cols();
    auto out = make_op_node(m->shape, {m, bias});
    for (int i = 0; i < r; ++i) {
        for (int j = 0; j < c; ++j) {
            out->val[static_cast<size_t>(i) * c + j] = m->at(i, j) + bias->val[j];
        }
    }
    if (out->requires_grad) {
        Tensor* self = out.get();
        out->backprop = [self, m, bias, r, c]() {
            if (m->requires_grad) {
                for (size_t i = 0; i < self->grad.size(); ++i) m->grad[i] += self->grad[i];
            }
            if (bias->requires_grad) {
                for (int i = 0; i < r; ++i) {
                    for (int j = 0; j < c; ++j) {
                        bias->grad[j] += self->grad[static_cast<size_t>(i) * c + j];
                    }
                }
            }
        };
    }
    return out;
}

TensorPtr sub(const TensorPtr& a, const TensorPtr& b) {
    if (a->shape != b->shape) shape_error("sub", a, b);
    auto out = make_op_node(a->shape, {a, b});
    for (size_t i = 0; i < out->val.size(); ++i) out->val[i] = a->val[i] - b->val[i];
    if (out->requires_grad) {
        Tensor* self = out.get();
        out->backprop = [self, a, b]() {
            if (a->requires_grad) {
                for (size_t i = 0; i < self->grad.size(); ++i) a->grad[i] += self->grad[i];
            }
            if (b->requires_grad) {
                for (size_t i = 0; i < self->grad.size(); ++i) b->grad[i] -= self->grad[i];
            }
        };
    }
    return out;
}

TensorPtr mul(const TensorPtr& a, const TensorPtr& b) {
    if (a->shape != b->shape) shape_error("mul", a, b);
    auto out = make_op_node(a->shape, {a, b});
    for (size_t i = 0; i < out->val.size(); ++i) out->val[i] = a->val[i] * b->val[i];
    if (out->requires_grad) {
        Tensor* self = out.get();
        out->backprop = [self, a, b]() {
            if (a->requires_grad) {
                for (size_t i = 0; i < self->grad.size(); ++i) {
                    a->grad[i] += self->grad[i] * b->val[i];
                }
            }
            if (b->requires_grad) {
                for (size_t i = 0; i < self->grad.size(); ++i) {
                    b->grad[i] += self->grad[i] * a->val[i];
                }
            }
        };
    }
    return out;
}

TensorPtr scale(const TensorPtr& x, double c) {
    auto out = make_op_node(x->shape, {x});
    for (size_t i = 0; i < out->val.size(); ++i) out->val[i] = x->val[i] * c;
    if (out->requires_grad) {
        Tensor* self = out.get();
        out->backprop = [self, x, c]() {
            if (!x->requires_grad) return;
            for (size_t i = 0; i < self->grad.size(); ++i) x->grad[i] += self->grad[i] * c;
        };
    }
    return out;
}

TensorPtr tanh_op(const TensorPtr& x) {
    auto out = make_op_node(x->shape, {x});
    for (size_t i = 0; i < out->val.size(); ++i) out->val[i] = std::tanh(x->val[i]);
    if (out->requires_grad) {
        Tensor* self = out.get();
        out->backprop = [self, x]() {
            if (!x->requires_grad) return;
            for (size_t i = 0; i < self->grad.size(); ++i) {
                const double y = self->val[i];
                x->grad[i] += self->grad[i] * (1.0 - y * y);
            }
        };
    }
    return out;
}

TensorPtr sigmoid_op(const TensorPtr& x) {
    auto out = make_op_node(x->shape, {x});
    for (size_t i = 0; i < out->val.size(); ++i) out->val[i] = 1.0 / (1.0 + std::exp(-x->val[i]));
    if (out->requires_grad) {
        Tensor* self = out.get();
        out->backprop = [self, x]() {
            if (!x->requires_grad) return;
            for (size_t i = 0; i < self->grad.size(); ++i) {
                const double y = self->val[i];
                x->grad[i] += self->grad[i] * y * (1.0 - y);
            }
        };
    }
    return out;
}

TensorPtr relu_op(const TensorPtr& x) {
    auto out = make_op_node(x->shape, {x});
    for (size_t i = 0; i < out->val.size(); ++i) out->val[i] = x->val[i] > 0.0 ? x->val[i] : 0.0;
    if (out->requires_grad) {
        Tensor* self = out.get();
        out->backprop = [self, x]() {
            if (!x->requires_grad) return;
            for (size_t i = 0; i < self->grad.size(); ++i) {
                if (x->val[i] > 0.0) x->grad[i] += self->grad[i];
            }
        };
    }
    return out;
}

TensorPtr concat_cols(const std::vector<TensorPtr>& xs) {
    if (xs.empty()) throw std::invalid_argument("concat_cols: no inputs");
    const int r = xs[0]->rows();
    int total = 0;
    for (const auto& x : xs) {
        check_matrix(x, "concat_cols");
        if (x->rows() != r) shape_error("concat_cols", xs[0], x);
        total += x->cols();
    }
    auto out = make_op_node({r, total}, xs);
    int off = 0;
    for (const auto& x : xs) {
        const int c = x->cols();
        for (int i = 0; i < r; ++i) {
            std::copy(x->val.begin() + static_cast<size_t>(i) * c,
                      x->val.begin() + static_cast<size_t>(i + 1) * c,
                      out->val.begin() + static_cast<size_t>(i) * total + off);
        }
        off += c;
    }
    if (out->requires_grad) {
        Tensor* self = out.get();
        auto parts = xs;
        out->backprop = [self, parts, r, total]() {
            int off2 = 0;
            for (const auto& x : parts) {
                const int c = x->cols();
                if (x->requires_grad) {
                    for (int i = 0; i < r; ++i) {
                        const double* g = self->grad.data() + static_cast<size_t>(i) * total + off2;
                        double* xg = x->grad.data() + static_cast<size_t>(i) * c;
                        for (int j = 0; j < c; ++j) xg[j] += g[j];
                    }
                }
                off2 += c;
            }
        };
    }
    return out;
}

TensorPtr concat_rows(const std::vector<TensorPtr>& xs) {
    if (xs.empty()) throw std::invalid_argument("concat_rows: no inputs");
    const int c = xs[0]->cols();
    int total = 0;
    for (const auto& x : xs) {
        check_matrix(x, "concat_rows");
        if (x->cols() != c) shape_error("concat_rows", xs[0], x);
        total += x->rows();
    }
    auto out = make_op_node({total, c}, xs);
    size_t off = 0;
    for (const auto& x : xs) {
        std::copy(x->val.begin(), x->val.end(), out->val.begin() + off);
        off += x->val.size();
    }
    if (out->requires_grad) {
        Tensor* self = out.get();
        auto parts = xs;
        out->backprop = [self, parts]() {
            size_t off2 = 0;
            for (const auto& x : parts) {
                if (x->requires_grad) {
                    for (size_t i = 0; i < x->grad.size(); ++i) x->grad[i] += self->grad[off2 + i];
                }
                off2 += x->val.size();
            }
        };
    }
    return out;
}

TensorPtr slice_rows(const TensorPtr& x, int row0, int nrows) {
    check_matrix(x, "slice_rows");
    if (row0 < 0 || nrows < 0 || row0 + nrows > x->rows()) {
        throw std::invalid_argument("slice_rows: range [" + std::to_string(row0) + ", " +
                                    std::to_string(row0 + nrows) + ") outside " + x->shape_str());
    }
    const int c = x->cols();
    auto out = make_op_node({nrows, c}, {x});
    std::copy(x->val.begin() + static_cast<size_t>(row0) * c,
              x->val.begin() + static_cast<size_t>(row0 + nrows) * c, out->val.begin());
    if (out->requires_grad) {
        Tensor* self = out.get();
        out->backprop = [self, x, row0, c]() {
            if (!x->requires_grad) return;
            double* xg = x->grad.data() + static_cast<size_t>(row0) * c;
            for (size_t i = 0; i < self->grad.size(); ++i) xg[i] += self->grad[i];
        };
    }
    return out;
}

TensorPtr gather_rows(const TensorPtr& x, const std::vector<int>& idx) {
    check_matrix(x, "gather_rows");
    const int r = x->rows(), c = x->cols();
    for (int i : idx) {
        if (i < 0 || i >= r) {
            throw std::invalid_argument("gather_rows: index " + std::to_string(i) +
                                        " outside row count " + std::to_string(r));
        }
    }
    auto out = make_op_node({static_cast<int>(idx.size()), c}, {x});
    for (size_t i = 0; i < idx.size(); ++i) {
        std::copy(x->val.begin() + static_cast<size_t>(idx[i]) * c,
                  x->val.begin() + static_cast<size_t>(idx[i] + 1) * c,
                  out->val.begin() + i * c);
    }
    if (out->requires_grad) {
        Tensor* self = out.get();
        out->backprop = [self, x, idx, c]() {
            if (!x->requires_grad) return;
            for (size_t i = 0; i < idx.size(); ++i) {
                double* xg = x->grad.data() + static_cast<size_t>(idx[i]) * c;
                const double* g = self->grad.data() + i * c;
                for (int j = 0; j < c; ++j) xg[j] += g[j];
            }
        };
    }
    return out;
}

TensorPtr reshape(const TensorPtr& x, std::vector<int> shape) {
    int64_t n = 1;
    for (int d : shape) n *= d;
    if (n != x->size()) {
        throw std::invalid_argument("reshape: " + x->shape_str() + " to " +
                                    shape_to_string(shape) + " changes element count");
    }
    auto out = make_op_node(std::move(shape), {x});
    out->val = x->val;
    if (out->requires_grad) {
        Tensor* self = out.get();
        out->backprop = [self, x]() {
            if (!x->requires_grad) return;
            for (size_t i = 0; i < self->grad.size(); ++i) x->grad[i] += self->grad[i];
        };
    }
    return out;
}

TensorPtr softmax_rows(const TensorPtr& x, const Mask& mask) {
    check_matrix(x, "softmax_rows");
    const int r = x->rows(), c = x->cols();
    if (mask.rows != r || mask.cols != c) {
        throw std::invalid_argument("softmax_rows: mask " + shape_to_string({mask.rows, mask.cols}) +
                                    " does not match " + x->shape_str());
    }
    for (int i = 0; i < r; ++i) {
        bool any = false;
        for (int j = 0; j < c && !any; ++j) any = mask.at(i, j);
        if (!any) {
            throw std::invalid_argument("softmax_rows: row " + std::to_string(i) +
                                        " is fully masked");
        }
    }
    auto out = make_op_node({r, c}, {x});
    for (int i = 0; i < r; ++i) {
        double mx = -std::numeric_limits<double>::infinity();
        for (int j = 0; j < c; ++j) {
            const double v = x->at(i, j) + (mask.at(i, j) ? 0.0 : kMaskFill);
            mx = std::max(mx, v);
        }
        double sum = 0.0;
        for (int j = 0; j < c; ++j) {
            const double v = x->at(i, j) + (mask.at(i, j) ? 0.0 : kMaskFill);
            const double e = std::exp(v - mx);
            out->val[static_cast<size_t>(i) * c + j] = e;
            sum += e;
        }
        for (int j = 0; j < c; ++j) {
            double& y = out->val[static_cast<size_t>(i) * c + j];
            y = mask.at(i, j) ? y / sum : 0.0;
        }
    }
    if (out->requires_grad) {
        Tensor* self = out.get();
        out->backprop = [self, x, r, c]() {
            if (!x->requires_grad) return;
            for (int i = 0; i < r; ++i) {
                const double* y = self->val.data() + static_cast<size_t>(i) * c;
                const double* g = self->grad.data() + static_cast<size_t>(i) * c;
                double dot = 0.0;
                for (int j = 0; j < c; ++j) dot += g[j] * y[j];
                double* xg = x->grad.data() + static_cast<size_t>(i) * c;
                for (int j = 0; j < c; ++j) xg[j] += y[j] * (g[j] - dot);
            }
        };
    }
    return out;
}

TensorPtr softmax_rows(const TensorPtr& x) {
    return softmax_rows(x, Mask::all(x->rows(), x->cols()));
}

TensorPtr cross_entropy(const TensorPtr& logits, int target, const Mask& mask) {
    check_matrix(logits, "cross_entropy");
    if (logits->rows() != 1) {
        throw std::invalid_argument("cross_entropy: expected a 1-row logit matrix, got " +
                                    logits->shape_str());
    }
    const int c = logits->cols();
    if (target < 0 || target >= c) {
        throw std::invalid_argument("cross_entropy: target " + std::to_string(target) +
                                    " outside " + std::to_string(c) + " classes");
    }
    const bool masked = !mask.empty();
    if (masked) {
        if (mask.rows != 1 || mask.cols != c) {
            throw std::invalid_argument("cross_entropy: mask shape mismatch");
        }
        if (!mask.at(0, target)) {
            throw std::invalid_argument("cross_entropy: target " + std::to_string(target) +
                                        " is masked out");
        }
    }
    auto eff = [&](int j) { return logits->val[j] + ((masked && !mask.at(0, j)) ? kMaskFill : 0.0); };
    double mx = -std::numeric_limits<double>::infinity();
    for (int j = 0; j < c; ++j) mx = std::max(mx, eff(j));
    double sum = 0.0;
    for (int j = 0; j < c; ++j) sum += std::exp(eff(j) - mx);
    const double lse = mx + std::log(sum);

    auto out = make_op_node({1, 1}, {logits});
    out->val[0] = lse - eff(target);
    if (out->requires_grad) {
        Tensor* self = out.get();
        Mask m = mask;
        out->backprop = [self, logits, target, m, c, lse, masked]() {
            if (!logits->requires_grad) return;
            const double g = self->grad[0];
            for (int j = 0; j < c; ++j) {
                const double e =
                    logits->val[j] + ((masked && !m.at(0, j)) ? kMaskFill : 0.0);
                double p = std::exp(e - lse);
                logits->grad[j] += g * (p - (j == target ? 1.0 : 0.0));
            }
        };
    }
    return out;
}

TensorPtr cross_entropy(const TensorPtr& logits, int target) {
    return cross_entropy(logits, target, Mask{});
}

TensorPtr frobenius_norm(const TensorPtr& x) {
    auto out = make_op_node({1, 1}, {x});
    double s = 0.0;
    for (double v : x->val) s += v * v;
    out->val[0] = std::sqrt(s);
    if (out->requires_grad) {
        Tensor* self = out.get();
        out->backprop = [self, x]() {
            if (!x->requires_grad) return;
            const double denom = std::max(self->val[0], 1e-12);
            const double g = self->grad[0] / denom;
            for (size_t i = 0; i < x->grad.size(); ++i) x->grad[i] += g * x->val[i];
        };
    }
    return out;
}

TensorPtr sum_all(const TensorPtr& x) {
    auto out = make_op_node({1, 1}, {x});
    double s = 0.0;
    for (double v : x->val) s += v;
    out->val[0] = s;
    if (out->requires_grad) {
        Tensor* self = out.get();
        out->backprop = [self, x]() {
            if (!x->requires_grad) return;
            const double g = self->grad[0];
            for (size_t i = 0; i < x->grad.size(); ++i) x->grad[i] += g;
        };
    }
    return out;
}

TensorPtr sum_axis(const TensorPtr& x, int axis) {
    check_matrix(x, "sum_axis");
    if (axis != 0 && axis != 1) throw std::invalid_argument("sum_axis: axis must be 0 or 1");
    const int r = x->rows(), c = x->cols();
    auto out = make_op_node(axis == 0 ? std::vector<int>{1, c} : std::vector<int>{r, 1}, {x});
    for (int i = 0; i < r; ++i) {
        for (int j = 0; j < c; ++j) {
            out->val[axis == 0 ? j : i] += x->at(i, j);
        }
    }
    if (out->requires_grad) {
        Tensor* self = out.get();
        out->backprop = [self, x, r, c, axis]() {
            if (!x->requires_grad) return;
            for (int i = 0; i < r; ++i) {
                for (int j = 0; j < c; ++j) {
                    x->grad[static_cast<size_t>(i) * c + j] += self->grad[axis == 0 ? j : i];
                }
            }
        };
    }
    return out;
}

TensorPtr weighted_sum_rows(const TensorPtr& w, const TensorPtr& x) { return matmul(w, x); }

TensorPtr add_n(const std::vector<TensorPtr>& xs) {
    if (xs.empty()) throw std::invalid_argument("add_n: no inputs");
    for (const auto& x : xs) {
        if (x->shape != xs[0]->shape) shape_error("add_n", xs[0], x);
    }
    auto out = make_op_node(xs[0]->shape, xs);
    for (const auto& x : xs) {
        for (size_t i = 0; i < out->val.size(); ++i) out->val[i] += x->val[i];
    }
    if (out->requires_grad) {
        Tensor* self = out.get();
        auto parts = xs;
        out->backprop = [self, parts]() {
            for (const auto& x : parts) {
                if (!x->requires_grad) continue;
                for (size_t i = 0; i < self->grad.size(); ++i) x->grad[i] += self->grad[i];
            }
        };
    }
    return out;
}

// ---------------------------------------------------------------------------
// Backward
// ---------------------------------------------------------------------------

void backward(const TensorPtr& loss) {
    if (loss->size() != 1) {
        throw std::invalid_argument("backward: loss must be scalar, got shape " +
                                    loss->shape_str());
    }
    if (!loss->requires_grad) return;

    // Postorder over parent edges; reversed it visits consumers before
    // producers.
    std::vector<Tensor*> order;
    std::unordered_set<Tensor*> visited;
    std::vector<std::pair<Tensor*, size_t>> stack;
    stack.emplace_back(loss.get(), 0);
    visited.insert(loss.get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            Tensor* p = node->parents[next++].get();
            if (p->requires_grad && !visited.count(p)) {
                visited.insert(p);
                stack.emplace_back(p, 0);
            }
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    loss->grad[0] += 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        if ((*it)->backprop) (*it)->backprop();
    }
}

}  // namespace relmod
