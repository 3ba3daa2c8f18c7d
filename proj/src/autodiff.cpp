#include "hinormer/autodiff.hpp"

#include <cmath>
#include <stdexcept>

namespace hinormer::ad {

Parameter::Parameter(std::string n, Matrix v) : name(std::move(n)), value(std::move(v))
{
    grad = Matrix::Zero(value.rows(), value.cols());
}

const Matrix& Var::value() const
{
    if (!tape_) throw std::logic_error("Var: use of unbound variable");
    return tape_->value(id_);
}

double Var::scalar() const
{
    const Matrix& v = value();
    if (v.size() != 1) throw std::invalid_argument("Var::scalar on " + shape_string(v.rows(), v.cols()));
    return v(0, 0);
}

Var Tape::push(Node node)
{
    nodes_.push_back(std::move(node));
    return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Tape::constant(Matrix value)
{
    Node n;
    n.value = std::move(value);
    return push(std::move(n));
}

Var Tape::param(Parameter& p)
{
    if (auto it = bound_.find(&p); it != bound_.end()) return Var(this, it->second);
    Node n;
    n.value = p.value;
    if (p.trainable) {
        n.param = &p;
        n.requires_grad = true;
    }
    Var v = push(std::move(n));
    bound_.emplace(&p, v.id());
    return v;
}

Var Tape::record(Matrix value, std::span<const Var> inputs, Backward backward)
{
    Node n;
    n.value = std::move(value);
    for (const Var& in : inputs) {
        if (in.tape() != this) throw std::invalid_argument("Tape::record: input from another tape");
        n.requires_grad = n.requires_grad || nodes_[in.id()].requires_grad;
    }
    if (n.requires_grad) n.backward = std::move(backward);
    return push(std::move(n));
}

Matrix& Tape::grad(int id)
{
    Node& n = nodes_[id];
    if (n.grad.size() == 0 && n.value.size() != 0) n.grad = Matrix::Zero(n.value.rows(), n.value.cols());
    return n.grad;
}

void Tape::backward(const Var& loss)
{
    if (loss.tape() != this) throw std::invalid_argument("Tape::backward: loss from another tape");
    const Matrix& lv = value(loss.id());
    if (lv.size() != 1)
        throw std::invalid_argument("Tape::backward: loss must be scalar, got " + shape_string(lv.rows(), lv.cols()));
    if (backward_done_) throw std::logic_error("Tape::backward called twice");
    backward_done_ = true;

    grad(loss.id())(0, 0) = 1.0;
    for (int id = loss.id(); id >= 0; --id) {
        Node& n = nodes_[id];
        if (!n.requires_grad || n.grad.size() == 0) continue;
        if (n.backward) n.backward(*this, id);
    }
    for (Node& n : nodes_) {
        if (!n.param || n.grad.size() == 0) continue;
        if (n.param->grad.rows() != n.value.rows() || n.param->grad.cols() != n.value.cols())
            n.param->zero_grad();
        n.param->grad += n.grad;
    }
}

namespace {

void check_same_tape(const Var& a, const Var& b)
{
    if (a.tape() != b.tape() || !a.valid()) throw std::invalid_argument("operands live on different tapes");
}

} // namespace

Var matmul(const Var& a, const Var& b)
{
    check_same_tape(a, b);
    Matrix out = hinormer::matmul(a.value(), b.value());
    const int ia = a.id(), ib = b.id();
    const Var in[] = {a, b};
    return a.tape()->record(std::move(out), in, [ia, ib](Tape& t, int self) {
        const Matrix& g = t.grad(self);
        if (t.requires_grad(ia)) t.grad(ia).noalias() += g * t.value(ib).transpose();
        if (t.requires_grad(ib)) t.grad(ib).noalias() += t.value(ia).transpose() * g;
    });
}

Var transpose(const Var& a)
{
    const int ia = a.id();
    const Var in[] = {a};
    return a.tape()->record(a.value().transpose(), in,
                            [ia](Tape& t, int self) { t.grad(ia) += t.grad(self).transpose(); });
}

Var add(const Var& a, const Var& b)
{
    check_same_tape(a, b);
    require_same_shape(a.value(), b.value(), "add");
    const int ia = a.id(), ib = b.id();
    const Var in[] = {a, b};
    return a.tape()->record(a.value() + b.value(), in, [ia, ib](Tape& t, int self) {
        const Matrix& g = t.grad(self);
        if (t.requires_grad(ia)) t.grad(ia) += g;
        if (t.requires_grad(ib)) t.grad(ib) += g;
    });
}

Var sub(const Var& a, const Var& b)
{
    check_same_tape(a, b);
    require_same_shape(a.value(), b.value(), "sub");
    const int ia = a.id(), ib = b.id();
    const Var in[] = {a, b};
    return a.tape()->record(a.value() - b.value(), in, [ia, ib](Tape& t, int self) {
        const Matrix& g = t.grad(self);
        if (t.requires_grad(ia)) t.grad(ia) += g;
        if (t.requires_grad(ib)) t.grad(ib) -= g;
    });
}

Var scale(const Var& a, double c)
{
    const int ia = a.id();
    const Var in[] = {a};
    return a.tape()->record(a.value() * c, in, [ia, c](Tape& t, int self) { t.grad(ia) += c * t.grad(self); });
}

Var hadamard(const Var& a, const Var& b)
{
    check_same_tape(a, b);
    require_same_shape(a.value(), b.value(), "hadamard");
    const int ia = a.id(), ib = b.id();
    const Var in[] = {a, b};
    return a.tape()->record(a.value().cwiseProduct(b.value()), in, [ia, ib](Tape& t, int self) {
        const Matrix& g = t.grad(self);
        if (t.requires_grad(ia)) t.grad(ia) += g.cwiseProduct(t.value(ib));
        if (t.requires_grad(ib)) t.grad(ib) += g.cwiseProduct(t.value(ia));
    });
}

Var mul_constant(const Var& a, Matrix m)
{
    require_same_shape(a.value(), m, "mul_constant");
    const int ia = a.id();
    Matrix out = a.value().cwiseProduct(m);
    const Var in[] = {a};
    return a.tape()->record(std::move(out), in, [ia, m = std::move(m)](Tape& t, int self) {
        t.grad(ia) += t.grad(self).cwiseProduct(m);
    });
}

Var add_row(const Var& a, const Var& row)
{
    check_same_tape(a, row);
    if (row.rows() != 1 || row.cols() != a.cols())
        throw std::invalid_argument("add_row: expected 1x" + std::to_string(a.cols()) + " row, got " +
                                    shape_string(row.rows(), row.cols()));
    const int ia = a.id(), ir = row.id();
    Matrix out = a.value().rowwise() + row.value().row(0);
    const Var in[] = {a, row};
    return a.tape()->record(std::move(out), in, [ia, ir](Tape& t, int self) {
        const Matrix& g = t.grad(self);
        if (t.requires_grad(ia)) t.grad(ia) += g;
        if (t.requires_grad(ir)) t.grad(ir) += g.colwise().sum();
    });
}

Var leaky_relu(const Var& a, double slope)
{
    const int ia = a.id();
    const Var in[] = {a};
    return a.tape()->record(hinormer::leaky_relu(a.value(), slope), in, [ia, slope](Tape& t, int self) {
        const Matrix& x = t.value(ia);
        t.grad(ia) += t.grad(self).cwiseProduct(x.unaryExpr([slope](double v) { return v > 0.0 ? 1.0 : slope; }));
    });
}

Var masked_softmax(const Var& a, std::vector<std::uint8_t> mask)
{
    const int ia = a.id();
    Matrix out = hinormer::masked_softmax(a.value(), Mask(mask));
    const Var in[] = {a};
    return a.tape()->record(std::move(out), in, [ia](Tape& t, int self) {
        const Matrix& y = t.value(self);
        const Matrix& g = t.grad(self);
        const Eigen::VectorXd dots = y.cwiseProduct(g).rowwise().sum();
        t.grad(ia) += y.cwiseProduct(g.colwise() - dots);
    });
}

Var layer_norm(const Var& x, const Var& scale, const Var& shift, double eps)
{
    check_same_tape(x, scale);
    check_same_tape(x, shift);
    Matrix out = hinormer::layer_norm(x.value(), scale.value(), shift.value(), eps);
    const int ix = x.id(), is = scale.id(), ib = shift.id();
    const Var in[] = {x, scale, shift};
    return x.tape()->record(std::move(out), in, [ix, is, ib, eps](Tape& t, int self) {
        const Matrix& xv = t.value(ix);
        const Eigen::RowVectorXd gamma = t.value(is).row(0);
        const Matrix& g = t.grad(self);
        const double n = static_cast<double>(xv.cols());
        Matrix xhat(xv.rows(), xv.cols());
        Eigen::VectorXd inv(xv.rows());
        for (Eigen::Index i = 0; i < xv.rows(); ++i) {
            const double mean = xv.row(i).sum() / n;
            const double var = (xv.row(i).array() - mean).square().sum() / n;
            inv(i) = 1.0 / std::sqrt(var + eps);
            xhat.row(i) = (xv.row(i).array() - mean) * inv(i);
        }
        if (t.requires_grad(is)) t.grad(is) += g.cwiseProduct(xhat).colwise().sum();
        if (t.requires_grad(ib)) t.grad(ib) += g.colwise().sum();
        if (t.requires_grad(ix)) {
            Matrix& gx = t.grad(ix);
            for (Eigen::Index i = 0; i < xv.rows(); ++i) {
                const Eigen::RowVectorXd dxhat = g.row(i).cwiseProduct(gamma);
                const double m1 = dxhat.sum() / n;
                const double m2 = dxhat.cwiseProduct(xhat.row(i)).sum() / n;
                gx.row(i) += inv(i) * (dxhat.array() - m1 - xhat.row(i).array() * m2).matrix();
            }
        }
    });
}

Var l2_normalize_rows(const Var& a)
{
    const int ia = a.id();
    const Var in[] = {a};
    return a.tape()->record(hinormer::l2_normalize_rows(a.value()), in, [ia](Tape& t, int self) {
        const Matrix& x = t.value(ia);
        const Matrix& y = t.value(self);
        const Matrix& g = t.grad(self);
        Matrix& gx = t.grad(ia);
        for (Eigen::Index i = 0; i < x.rows(); ++i) {
            const double n = x.row(i).norm();
            if (n == 0.0) continue;
            const double d = y.row(i).dot(g.row(i));
            gx.row(i) += (g.row(i) - d * y.row(i)) / n;
        }
    });
}

Var hconcat(std::span<const Var> parts)
{
    if (parts.empty()) throw std::invalid_argument("hconcat: no parts");
    const Eigen::Index rows = parts[0].rows();
    Eigen::Index cols = 0;
    for (const Var& p : parts) {
        check_same_tape(parts[0], p);
        if (p.rows() != rows) throw std::invalid_argument("hconcat: row count mismatch");
        cols += p.cols();
    }
    Matrix out(rows, cols);
    std::vector<int> ids;
    std::vector<Eigen::Index> offsets;
    Eigen::Index off = 0;
    for (const Var& p : parts) {
        out.middleCols(off, p.cols()) = p.value();
        ids.push_back(p.id());
        offsets.push_back(off);
        off += p.cols();
    }
    return parts[0].tape()->record(std::move(out), parts, [ids, offsets](Tape& t, int self) {
        const Matrix& g = t.grad(self);
        for (std::size_t k = 0; k < ids.size(); ++k)
            if (t.requires_grad(ids[k])) t.grad(ids[k]) += g.middleCols(offsets[k], t.value(ids[k]).cols());
    });
}

Var vstack(std::span<const Var> parts)
{
    if (parts.empty()) throw std::invalid_argument("vstack: no parts");
    const Eigen::Index cols = parts[0].cols();
    Eigen::Index rows = 0;
    for (const Var& p : parts) {
        check_same_tape(parts[0], p);
        if (p.cols() != cols) throw std::invalid_argument("vstack: column count mismatch");
        rows += p.rows();
    }
    Matrix out(rows, cols);
    std::vector<int> ids;
    std::vector<Eigen::Index> offsets;
    Eigen::Index off = 0;
    for (const Var& p : parts) {
        out.middleRows(off, p.rows()) = p.value();
        ids.push_back(p.id());
        offsets.push_back(off);
        off += p.rows();
    }
    return parts[0].tape()->record(std::move(out), parts, [ids, offsets](Tape& t, int self) {
        const Matrix& g = t.grad(self);
        for (std::size_t k = 0; k < ids.size(); ++k)
            if (t.requires_grad(ids[k])) t.grad(ids[k]) += g.middleRows(offsets[k], t.value(ids[k]).rows());
    });
}

Var gather_rows(const Var& a, std::vector<int> idx)
{
    const Matrix& av = a.value();
    Matrix out = Matrix::Zero(static_cast<Eigen::Index>(idx.size()), av.cols());
    for (std::size_t i = 0; i < idx.size(); ++i) {
        if (idx[i] < 0) continue;
        if (idx[i] >= av.rows()) throw std::out_of_range("gather_rows: row " + std::to_string(idx[i]) + " out of range");
        out.row(static_cast<Eigen::Index>(i)) = av.row(idx[i]);
    }
    const int ia = a.id();
    const Var in[] = {a};
    return a.tape()->record(std::move(out), in, [ia, idx = std::move(idx)](Tape& t, int self) {
        const Matrix& g = t.grad(self);
        Matrix& ga = t.grad(ia);
        for (std::size_t i = 0; i < idx.size(); ++i)
            if (idx[i] >= 0) ga.row(idx[i]) += g.row(static_cast<Eigen::Index>(i));
    });
}

Var slice_cols(const Var& a, Eigen::Index start, Eigen::Index count)
{
    if (start < 0 || count < 0 || start + count > a.cols())
        throw std::out_of_range("slice_cols: [" + std::to_string(start) + ", " + std::to_string(start + count) +
                                ") outside " + std::to_string(a.cols()) + " columns");
    const int ia = a.id();
    const Var in[] = {a};
    return a.tape()->record(a.value().middleCols(start, count), in, [ia, start, count](Tape& t, int self) {
        t.grad(ia).middleCols(start, count) += t.grad(self);
    });
}

Var assemble_rows(std::span<const Var> parts, std::vector<std::vector<int>> rows, Eigen::Index n_rows)
{
    if (parts.empty() || parts.size() != rows.size()) throw std::invalid_argument("assemble_rows: parts/rows mismatch");
    const Eigen::Index cols = parts[0].cols();
    Matrix out = Matrix::Zero(n_rows, cols);
    std::vector<int> ids;
    for (std::size_t k = 0; k < parts.size(); ++k) {
        check_same_tape(parts[0], parts[k]);
        const Matrix& pv = parts[k].value();
        if (pv.cols() != cols || pv.rows() != static_cast<Eigen::Index>(rows[k].size()))
            throw std::invalid_argument("assemble_rows: part " + std::to_string(k) + " has shape " +
                                        shape_string(pv.rows(), pv.cols()));
        for (std::size_t i = 0; i < rows[k].size(); ++i) out.row(rows[k][i]) = pv.row(static_cast<Eigen::Index>(i));
        ids.push_back(parts[k].id());
    }
    return parts[0].tape()->record(std::move(out), parts, [ids, rows = std::move(rows)](Tape& t, int self) {
        const Matrix& g = t.grad(self);
        for (std::size_t k = 0; k < ids.size(); ++k) {
            if (!t.requires_grad(ids[k])) continue;
            Matrix& gp = t.grad(ids[k]);
            for (std::size_t i = 0; i < rows[k].size(); ++i) gp.row(static_cast<Eigen::Index>(i)) += g.row(rows[k][i]);
        }
    });
}

Var spmm(std::shared_ptr<const SparseMatrix> s, const Var& a)
{
    if (s->cols() != a.rows())
        throw std::invalid_argument("spmm: shape mismatch " + shape_string(s->rows(), s->cols()) + " * " +
                                    shape_string(a.rows(), a.cols()));
    Matrix out = (*s) * a.value();
    const int ia = a.id();
    const Var in[] = {a};
    return a.tape()->record(std::move(out), in, [ia, s = std::move(s)](Tape& t, int self) {
        t.grad(ia).noalias() += s->transpose() * t.grad(self);
    });
}

Var scale_rows_by_group(const Var& x, const Var& w, std::vector<int> group)
{
    check_same_tape(x, w);
    if (static_cast<Eigen::Index>(group.size()) != x.rows()) throw std::invalid_argument("scale_rows_by_group: group size");
    if (w.rows() != 1) throw std::invalid_argument("scale_rows_by_group: weights must be a row vector");
    Matrix out = x.value();
    for (std::size_t u = 0; u < group.size(); ++u) {
        if (group[u] < 0 || group[u] >= w.cols()) throw std::out_of_range("scale_rows_by_group: group id");
        out.row(static_cast<Eigen::Index>(u)) *= w.value()(0, group[u]);
    }
    const int ix = x.id(), iw = w.id();
    const Var in[] = {x, w};
    return x.tape()->record(std::move(out), in, [ix, iw, group = std::move(group)](Tape& t, int self) {
        const Matrix& g = t.grad(self);
        const Matrix& xv = t.value(ix);
        const Matrix& wv = t.value(iw);
        const bool gx = t.requires_grad(ix), gw = t.requires_grad(iw);
        for (std::size_t u = 0; u < group.size(); ++u) {
            const auto r = static_cast<Eigen::Index>(u);
            if (gx) t.grad(ix).row(r) += wv(0, group[u]) * g.row(r);
            if (gw) t.grad(iw)(0, group[u]) += g.row(r).dot(xv.row(r));
        }
    });
}

Var pairwise_sum(const Var& left, const Var& right)
{
    check_same_tape(left, right);
    if (left.cols() != 1 || right.cols() != 1) throw std::invalid_argument("pairwise_sum: column vectors expected");
    const Eigen::Index n = left.rows(), m = right.rows();
    Matrix out = left.value() * Eigen::RowVectorXd::Ones(m) + Eigen::VectorXd::Ones(n) * right.value().transpose();
    const int il = left.id(), ir = right.id();
    const Var in[] = {left, right};
    return left.tape()->record(std::move(out), in, [il, ir](Tape& t, int self) {
        const Matrix& g = t.grad(self);
        if (t.requires_grad(il)) t.grad(il) += g.rowwise().sum();
        if (t.requires_grad(ir)) t.grad(ir) += g.colwise().sum().transpose();
    });
}

Var pairwise_leaky_score(const Var& p, const Var& q, const Var& a, double slope)
{
    check_same_tape(p, q);
    check_same_tape(p, a);
    const Eigen::Index k = p.cols();
    if (q.cols() != k || a.rows() != 1 || a.cols() != k)
        throw std::invalid_argument("pairwise_leaky_score: widths " + shape_string(p.rows(), p.cols()) + ", " +
                                    shape_string(q.rows(), q.cols()) + ", " + shape_string(a.rows(), a.cols()));
    const Matrix& pv = p.value();
    const Matrix& qv = q.value();
    const Eigen::RowVectorXd av = a.value().row(0);
    Matrix out(pv.rows(), qv.rows());
    for (Eigen::Index i = 0; i < pv.rows(); ++i)
        for (Eigen::Index j = 0; j < qv.rows(); ++j) {
            double s = 0.0;
            for (Eigen::Index c = 0; c < k; ++c) {
                const double z = pv(i, c) + qv(j, c);
                s += av(c) * (z > 0.0 ? z : slope * z);
            }
            out(i, j) = s;
        }
    const int ip = p.id(), iq = q.id(), ia = a.id();
    const Var in[] = {p, q, a};
    return p.tape()->record(std::move(out), in, [ip, iq, ia, slope](Tape& t, int self) {
        const Matrix& g = t.grad(self);
        const Matrix& pv = t.value(ip);
        const Matrix& qv = t.value(iq);
        const Eigen::RowVectorXd av = t.value(ia).row(0);
        Matrix gp = Matrix::Zero(pv.rows(), pv.cols());
        Matrix gq = Matrix::Zero(qv.rows(), qv.cols());
        Eigen::RowVectorXd ga = Eigen::RowVectorXd::Zero(av.size());
        for (Eigen::Index i = 0; i < pv.rows(); ++i)
            for (Eigen::Index j = 0; j < qv.rows(); ++j) {
                const double gij = g(i, j);
                if (gij == 0.0) continue;
                for (Eigen::Index c = 0; c < av.size(); ++c) {
                    const double z = pv(i, c) + qv(j, c);
                    const bool pos = z > 0.0;
                    ga(c) += gij * (pos ? z : slope * z);
                    const double dz = gij * av(c) * (pos ? 1.0 : slope);
                    gp(i, c) += dz;
                    gq(j, c) += dz;
                }
            }
        if (t.requires_grad(ip)) t.grad(ip) += gp;
        if (t.requires_grad(iq)) t.grad(iq) += gq;
        if (t.requires_grad(ia)) t.grad(ia) += ga;
    });
}

Var sum(const Var& a)
{
    Matrix out(1, 1);
    out(0, 0) = a.value().sum();
    const int ia = a.id();
    const Var in[] = {a};
    return a.tape()->record(std::move(out), in, [ia](Tape& t, int self) {
        t.grad(ia).array() += t.grad(self)(0, 0);
    });
}

Var softmax_cross_entropy(const Var& logits, std::vector<int> labels)
{
    const Matrix& z = logits.value();
    if (static_cast<Eigen::Index>(labels.size()) != z.rows())
        throw std::invalid_argument("softmax_cross_entropy: " + std::to_string(labels.size()) + " labels for " +
                                    std::to_string(z.rows()) + " rows");
    Matrix probs(z.rows(), z.cols());
    double total = 0.0;
    for (Eigen::Index i = 0; i < z.rows(); ++i) {
        const int y = labels[static_cast<std::size_t>(i)];
        if (y < 0 || y >= z.cols())
            throw std::out_of_range("softmax_cross_entropy: label " + std::to_string(y) + " outside [0, " +
                                    std::to_string(z.cols()) + ")");
        const double mx = z.row(i).maxCoeff();
        const Eigen::RowVectorXd e = (z.row(i).array() - mx).exp().matrix();
        const double se = e.sum();
        probs.row(i) = e / se;
        total += std::log(se) + mx - z(i, y);
    }
    Matrix out(1, 1);
    out(0, 0) = total;
    const int il = logits.id();
    const Var in[] = {logits};
    return logits.tape()->record(std::move(out), in,
                                 [il, probs = std::move(probs), labels = std::move(labels)](Tape& t, int self) {
                                     Matrix d = probs;
                                     for (std::size_t i = 0; i < labels.size(); ++i)
                                         d(static_cast<Eigen::Index>(i), labels[i]) -= 1.0;
                                     t.grad(il) += t.grad(self)(0, 0) * d;
                                 });
}

Var sigmoid_bce(const Var& logits, Matrix targets)
{
    require_same_shape(logits.value(), targets, "sigmoid_bce");
    const Matrix& z = logits.value();
    double total = 0.0;
    for (Eigen::Index i = 0; i < z.rows(); ++i)
        for (Eigen::Index j = 0; j < z.cols(); ++j) {
            const double x = z(i, j);
            total += std::max(x, 0.0) - x * targets(i, j) + std::log1p(std::exp(-std::abs(x)));
        }
    Matrix out(1, 1);
    out(0, 0) = total;
    const int il = logits.id();
    const Var in[] = {logits};
    return logits.tape()->record(std::move(out), in, [il, targets = std::move(targets)](Tape& t, int self) {
        const Matrix& z = t.value(il);
        const Matrix sig = z.unaryExpr([](double x) { return 1.0 / (1.0 + std::exp(-x)); });
        t.grad(il) += t.grad(self)(0, 0) * (sig - targets);
    });
}

} // namespace hinormer::ad
