#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "canvass/rng.hpp"
#include "gnn_kernels.hpp"

namespace canvass {

namespace {

struct AdamState {
    Matrix mW1, vW1, mW2, vW2;
    std::vector<double> mb1, vb1, mb2, vb2;
    int t = 0;

    explicit AdamState(const ModelParams& p)
        : mW1(p.W1.rows(), p.W1.cols()),
          vW1(p.W1.rows(), p.W1.cols()),
          mW2(p.W2.rows(), p.W2.cols()),
          vW2(p.W2.rows(), p.W2.cols()),
          mb1(p.b1.size(), 0.0),
          vb1(p.b1.size(), 0.0),
          mb2(p.b2.size(), 0.0),
          vb2(p.b2.size(), 0.0) {}
};

constexpr double kBeta1 = 0.9;
constexpr double kBeta2 = 0.999;
constexpr double kEps = 1e-8;

void adam_update(double* param, double* m, double* v, const double* grad, size_t count, double lr, double wd,
                 double bc1, double bc2) {
    for (size_t i = 0; i < count; ++i) {
        const double g = grad[i] + wd * param[i];
        m[i] = kBeta1 * m[i] + (1.0 - kBeta1) * g;
        v[i] = kBeta2 * v[i] + (1.0 - kBeta2) * g * g;
        param[i] -= lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + kEps);
    }
}

Matrix glorot(int rows, int cols, Rng& rng) {
    Matrix m(rows, cols);
    const double a = std::sqrt(6.0 / (rows + cols));
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) m.at(i, j) = (2.0 * rng.uniform() - 1.0) * a;
    return m;
}

struct TrainWork {
    Matrix P1, Pn1, M1raw;         // layer-1 products
    Matrix Z1, H1, H1d;
    Matrix P2, Pn2raw, O;
    std::vector<uint8_t> keep;     // dropout mask over H1 entries
    Matrix G_O, G_Z1;
    Matrix dW1, dW2;
    std::vector<double> db1, db2;
};

}  // namespace

ModelParams train(const Graph& g, const Split& split, const TrainConfig& cfg, Backbone backbone, uint64_t seed,
                  const EpochObserver& observer) {
    const int n = g.n();
    const int d = g.d();
    const int h = cfg.hidden;
    {
        bool has0 = false, has1 = false;
        for (int v : split.train) (g.label(v) == 0 ? has0 : has1) = true;
        if (!has0 || !has1) throw ValidationError("train set must contain both label classes");
    }

    Rng rng(seed);
    ModelParams model;
    model.backbone = backbone;
    model.d = d;
    model.hidden = h;
    const int w1_rows = backbone == Backbone::gcn ? d : 2 * d;
    const int w2_rows = backbone == Backbone::gcn ? h : 2 * h;
    model.W1 = glorot(w1_rows, h, rng);
    model.W2 = glorot(w2_rows, 2, rng);
    model.b1.assign(h, 0.0);
    model.b2.assign(2, 0.0);

    AdamState adam(model);
    TrainWork w;
    w.Z1 = Matrix(n, h);
    w.H1 = Matrix(n, h);
    w.H1d = Matrix(n, h);
    w.O = Matrix(n, 2);
    w.keep.assign(static_cast<size_t>(n) * h, 1);

    std::vector<double> inv_sqrt_deg(n);
    for (int v = 0; v < n; ++v) inv_sqrt_deg[v] = 1.0 / std::sqrt(1.0 + g.degree(v));

    const double keep_prob = 1.0 - cfg.dropout;
    const double ntr = static_cast<double>(split.train.size());

    ModelParams best = model;
    double best_val = -1.0;
    int best_epoch = 0;
    int epochs_run = 0;

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        epochs_run = epoch;
        // dropout mask for this epoch
        if (cfg.dropout > 0.0)
            for (auto& b : w.keep) b = rng.bernoulli(keep_prob) ? 1 : 0;

        // ---- forward with dropout on the hidden layer ----
        if (backbone == Backbone::gcn) {
            w.P1 = Matrix(n, h);
            for (int v = 0; v < n; ++v) detail::feature_row_product(g, model.W1, 0, v, w.P1.row(v), h);
            for (int i = 0; i < n; ++i) {
                double* z = w.Z1.row(i);
                for (int k = 0; k < h; ++k) z[k] = model.b1[k];
                detail::for_each_closed_neighbor(g, i, [&](int l) {
                    const double wt = inv_sqrt_deg[i] * inv_sqrt_deg[l];
                    const double* p = w.P1.row(l);
                    for (int k = 0; k < h; ++k) z[k] += wt * p[k];
                });
            }
        } else {
            w.P1 = Matrix(n, h);
            w.Pn1 = Matrix(n, h);
            for (int v = 0; v < n; ++v) {
                detail::feature_row_product(g, model.W1, 0, v, w.P1.row(v), h);
                detail::feature_row_product(g, model.W1, d, v, w.Pn1.row(v), h);
            }
            for (int i = 0; i < n; ++i) {
                double* z = w.Z1.row(i);
                const double* ps = w.P1.row(i);
                const int deg = g.degree(i);
                for (int k = 0; k < h; ++k) z[k] = model.b1[k] + ps[k];
                if (deg > 0) {
                    for (int j : g.neighbors(i)) {
                        const double* p = w.Pn1.row(j);
                        for (int k = 0; k < h; ++k) z[k] += p[k] / deg;
                    }
                }
            }
        }
        for (int i = 0; i < n; ++i) {
            const double* z = w.Z1.row(i);
            double* hh = w.H1.row(i);
            double* hd = w.H1d.row(i);
            const uint8_t* keep = &w.keep[static_cast<size_t>(i) * h];
            for (int k = 0; k < h; ++k) {
                hh[k] = z[k] > 0.0 ? z[k] : 0.0;
                hd[k] = cfg.dropout > 0.0 ? (keep[k] ? hh[k] / keep_prob : 0.0) : hh[k];
            }
        }
        if (backbone == Backbone::gcn) {
            w.P2 = Matrix(n, 2);
            for (int i = 0; i < n; ++i) {
                const double* hd = w.H1d.row(i);
                double* p = w.P2.row(i);
                for (int k = 0; k < h; ++k) {
                    p[0] += hd[k] * model.W2.at(k, 0);
                    p[1] += hd[k] * model.W2.at(k, 1);
                }
            }
            for (int i = 0; i < n; ++i) {
                double* o = w.O.row(i);
                o[0] = model.b2[0];
                o[1] = model.b2[1];
                detail::for_each_closed_neighbor(g, i, [&](int l) {
                    const double wt = inv_sqrt_deg[i] * inv_sqrt_deg[l];
                    o[0] += wt * w.P2.at(l, 0);
                    o[1] += wt * w.P2.at(l, 1);
                });
            }
        } else {
            w.P2 = Matrix(n, 2);
            w.Pn2raw = Matrix(n, 2);
            for (int i = 0; i < n; ++i) {
                const double* hd = w.H1d.row(i);
                double* ps = w.P2.row(i);
                double* pn = w.Pn2raw.row(i);
                for (int k = 0; k < h; ++k) {
                    ps[0] += hd[k] * model.W2.at(k, 0);
                    ps[1] += hd[k] * model.W2.at(k, 1);
                    pn[0] += hd[k] * model.W2.at(h + k, 0);
                    pn[1] += hd[k] * model.W2.at(h + k, 1);
                }
            }
            for (int i = 0; i < n; ++i) {
                double* o = w.O.row(i);
                const int deg = g.degree(i);
                o[0] = model.b2[0] + w.P2.at(i, 0);
                o[1] = model.b2[1] + w.P2.at(i, 1);
                if (deg > 0) {
                    double m0 = 0.0, m1 = 0.0;
                    for (int j : g.neighbors(i)) {
                        m0 += w.Pn2raw.at(j, 0);
                        m1 += w.Pn2raw.at(j, 1);
                    }
                    o[0] += m0 / deg;
                    o[1] += m1 / deg;
                }
            }
        }

        // ---- loss and logit gradients on the training nodes ----
        double loss = 0.0;
        w.G_O = Matrix(n, 2);
        for (int v : split.train) {
            const double o0 = w.O.at(v, 0), o1 = w.O.at(v, 1);
            const double m = std::max(o0, o1);
            const double e0 = std::exp(o0 - m), e1 = std::exp(o1 - m);
            const double zsum = e0 + e1;
            const double p0 = e0 / zsum, p1 = e1 / zsum;
            const int y = g.label(v);
            loss += -((y == 0 ? o0 : o1) - m - std::log(zsum));
            w.G_O.at(v, 0) = (p0 - (y == 0 ? 1.0 : 0.0)) / ntr;
            w.G_O.at(v, 1) = (p1 - (y == 1 ? 1.0 : 0.0)) / ntr;
        }
        loss /= ntr;
        if (!std::isfinite(loss))
            throw std::runtime_error("training diverged: non-finite loss at epoch " + std::to_string(epoch));

        // ---- backward ----
        w.G_Z1 = Matrix(n, h);
        w.dW1 = Matrix(model.W1.rows(), h);
        w.dW2 = Matrix(model.W2.rows(), 2);
        w.db1.assign(h, 0.0);
        w.db2.assign(2, 0.0);

        if (backbone == Backbone::gcn) {
            Matrix U2(n, 2);  // A_hat G_O
            for (int j = 0; j < n; ++j) {
                const double g0 = w.G_O.at(j, 0), g1 = w.G_O.at(j, 1);
                if (g0 == 0.0 && g1 == 0.0) continue;
                detail::for_each_closed_neighbor(g, j, [&](int l) {
                    const double wt = inv_sqrt_deg[l] * inv_sqrt_deg[j];
                    U2.at(l, 0) += wt * g0;
                    U2.at(l, 1) += wt * g1;
                });
            }
            for (int i = 0; i < n; ++i) {
                w.db2[0] += w.G_O.at(i, 0);
                w.db2[1] += w.G_O.at(i, 1);
                const double u0 = U2.at(i, 0), u1 = U2.at(i, 1);
                const double* hd = w.H1d.row(i);
                for (int k = 0; k < h; ++k) {
                    w.dW2.at(k, 0) += hd[k] * u0;
                    w.dW2.at(k, 1) += hd[k] * u1;
                }
                const double* z = w.Z1.row(i);
                const uint8_t* keep = &w.keep[static_cast<size_t>(i) * h];
                double* gz = w.G_Z1.row(i);
                for (int k = 0; k < h; ++k) {
                    double dh = u0 * model.W2.at(k, 0) + u1 * model.W2.at(k, 1);
                    if (cfg.dropout > 0.0) dh = keep[k] ? dh / keep_prob : 0.0;
                    gz[k] = z[k] > 0.0 ? dh : 0.0;
                    w.db1[k] += gz[k];
                }
            }
            Matrix V(n, h);  // A_hat G_Z1
            for (int j = 0; j < n; ++j) {
                const double* gz = w.G_Z1.row(j);
                bool any = false;
                for (int k = 0; k < h; ++k)
                    if (gz[k] != 0.0) {
                        any = true;
                        break;
                    }
                if (!any) continue;
                detail::for_each_closed_neighbor(g, j, [&](int l) {
                    const double wt = inv_sqrt_deg[l] * inv_sqrt_deg[j];
                    double* dst = V.row(l);
                    for (int k = 0; k < h; ++k) dst[k] += wt * gz[k];
                });
            }
            for (int i = 0; i < n; ++i) {
                const double* src = V.row(i);
                for (int b : g.feature_bits(i)) {
                    double* dst = w.dW1.row(b);
                    for (int k = 0; k < h; ++k) dst[k] += src[k];
                }
            }
        } else {
            Matrix dPn2(n, 2);  // dL/dPn2raw
            for (int i = 0; i < n; ++i) {
                const int deg = g.degree(i);
                const double g0 = w.G_O.at(i, 0), g1 = w.G_O.at(i, 1);
                w.db2[0] += g0;
                w.db2[1] += g1;
                if (deg == 0 || (g0 == 0.0 && g1 == 0.0)) continue;
                for (int j : g.neighbors(i)) {
                    dPn2.at(j, 0) += g0 / deg;
                    dPn2.at(j, 1) += g1 / deg;
                }
            }
            for (int i = 0; i < n; ++i) {
                const double* hd = w.H1d.row(i);
                const double g0 = w.G_O.at(i, 0), g1 = w.G_O.at(i, 1);
                const double q0 = dPn2.at(i, 0), q1 = dPn2.at(i, 1);
                for (int k = 0; k < h; ++k) {
                    w.dW2.at(k, 0) += hd[k] * g0;
                    w.dW2.at(k, 1) += hd[k] * g1;
                    w.dW2.at(h + k, 0) += hd[k] * q0;
                    w.dW2.at(h + k, 1) += hd[k] * q1;
                }
                const double* z = w.Z1.row(i);
                const uint8_t* keep = &w.keep[static_cast<size_t>(i) * h];
                double* gz = w.G_Z1.row(i);
                for (int k = 0; k < h; ++k) {
                    double dh = g0 * model.W2.at(k, 0) + g1 * model.W2.at(k, 1) + q0 * model.W2.at(h + k, 0) +
                                q1 * model.W2.at(h + k, 1);
                    if (cfg.dropout > 0.0) dh = keep[k] ? dh / keep_prob : 0.0;
                    gz[k] = z[k] > 0.0 ? dh : 0.0;
                    w.db1[k] += gz[k];
                }
            }
            Matrix dPn1(n, h);  // dL/dPn1
            for (int i = 0; i < n; ++i) {
                const int deg = g.degree(i);
                if (deg == 0) continue;
                const double* gz = w.G_Z1.row(i);
                for (int j : g.neighbors(i)) {
                    double* dst = dPn1.row(j);
                    for (int k = 0; k < h; ++k) dst[k] += gz[k] / deg;
                }
            }
            for (int i = 0; i < n; ++i) {
                const double* gs = w.G_Z1.row(i);
                const double* gn = dPn1.row(i);
                for (int b : g.feature_bits(i)) {
                    double* ds = w.dW1.row(b);
                    double* dn = w.dW1.row(d + b);
                    for (int k = 0; k < h; ++k) {
                        ds[k] += gs[k];
                        dn[k] += gn[k];
                    }
                }
            }
        }

        // ---- adaptive-moment update with weight decay ----
        ++adam.t;
        const double bc1 = 1.0 - std::pow(kBeta1, adam.t);
        const double bc2 = 1.0 - std::pow(kBeta2, adam.t);
        adam_update(model.W1.data(), adam.mW1.data(), adam.vW1.data(), w.dW1.data(),
                    static_cast<size_t>(model.W1.rows()) * h, cfg.lr, cfg.weight_decay, bc1, bc2);
        adam_update(model.W2.data(), adam.mW2.data(), adam.vW2.data(), w.dW2.data(),
                    static_cast<size_t>(model.W2.rows()) * 2, cfg.lr, cfg.weight_decay, bc1, bc2);
        adam_update(model.b1.data(), adam.mb1.data(), adam.vb1.data(), w.db1.data(), model.b1.size(), cfg.lr,
                    cfg.weight_decay, bc1, bc2);
        adam_update(model.b2.data(), adam.mb2.data(), adam.vb2.data(), w.db2.data(), model.b2.size(), cfg.lr,
                    cfg.weight_decay, bc1, bc2);

        // ---- dropout-free evaluation for early stopping ----
        const std::vector<int> preds = predict(model, g);
        const double train_acc = accuracy(preds, g, split.train);
        const double val_acc = accuracy(preds, g, split.val);
        if (observer) observer(epoch, loss, train_acc, val_acc);
        if (val_acc > best_val) {
            best_val = val_acc;
            best = model;
            best_epoch = epoch;
        }
        if (epoch - best_epoch >= cfg.patience) break;
    }

    best.meta.epochs_run = epochs_run;
    best.meta.best_epoch = best_epoch;
    best.meta.best_val_acc = best_val;
    return best;
}

}  // namespace canvass
