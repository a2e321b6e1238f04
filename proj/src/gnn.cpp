#include "canvass/gnn.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <json.hpp>

#include "gnn_kernels.hpp"

namespace canvass {

using nlohmann::json;

std::string to_string(Backbone b) { return b == Backbone::gcn ? "gcn" : "sage"; }

Backbone backbone_from_string(const std::string& s) {
    if (s == "gcn") return Backbone::gcn;
    if (s == "sage") return Backbone::sage;
    throw ValidationError("unknown backbone '" + s + "'");
}

Matrix normalize_adjacency(const Graph& g) {
    const int n = g.n();
    std::vector<double> is(n);
    for (int v = 0; v < n; ++v) is[v] = 1.0 / std::sqrt(1.0 + g.degree(v));
    Matrix out(n, n);
    for (int u = 0; u < n; ++u) {
        out.at(u, u) = is[u] * is[u];
        for (int v : g.neighbors(u)) out.at(u, v) = is[u] * is[v];
    }
    return out;
}

namespace detail {

void feature_row_product(const Graph& g, const Matrix& W, int row_offset, int v, double* out, int h) {
    std::fill(out, out + h, 0.0);
    for (int b : g.feature_bits(v)) {
        const double* w = W.row(row_offset + b);
        for (int k = 0; k < h; ++k) out[k] += w[k];
    }
}

GnnCache build_cache(const ModelParams& model, const Graph& g) {
    const int n = g.n();
    const int h = model.hidden;
    GnnCache c;
    c.Z1 = Matrix(n, h);
    c.H1 = Matrix(n, h);
    c.O = Matrix(n, 2);

    c.w1_bit_norm.resize(model.d);
    c.w1_bit_order.resize(model.d);
    for (int b = 0; b < model.d; ++b) {
        double sq = dot(model.W1.row(b), model.W1.row(b), h);
        if (model.backbone == Backbone::sage)
            sq += dot(model.W1.row(model.d + b), model.W1.row(model.d + b), h);
        c.w1_bit_norm[b] = std::sqrt(sq);
        c.w1_bit_order[b] = b;
    }
    std::sort(c.w1_bit_order.begin(), c.w1_bit_order.end(), [&](int x, int y) {
        if (c.w1_bit_norm[x] != c.w1_bit_norm[y]) return c.w1_bit_norm[x] > c.w1_bit_norm[y];
        return x < y;
    });

    if (model.backbone == Backbone::gcn) {
        c.inv_sqrt_deg.resize(n);
        for (int v = 0; v < n; ++v) c.inv_sqrt_deg[v] = 1.0 / std::sqrt(1.0 + g.degree(v));
        c.P1 = Matrix(n, h);
        for (int v = 0; v < n; ++v) feature_row_product(g, model.W1, 0, v, c.P1.row(v), h);
        for (int i = 0; i < n; ++i) {
            double* z = c.Z1.row(i);
            for (int k = 0; k < h; ++k) z[k] = model.b1[k];
            const double isi = c.inv_sqrt_deg[i];
            for_each_closed_neighbor(g, i, [&](int l) {
                const double w = isi * c.inv_sqrt_deg[l];
                const double* p = c.P1.row(l);
                for (int k = 0; k < h; ++k) z[k] += w * p[k];
            });
            double* hh = c.H1.row(i);
            for (int k = 0; k < h; ++k) hh[k] = z[k] > 0.0 ? z[k] : 0.0;
        }
        c.P2 = Matrix(n, 2);
        for (int i = 0; i < n; ++i) {
            const double* hh = c.H1.row(i);
            double* p = c.P2.row(i);
            for (int k = 0; k < h; ++k) {
                p[0] += hh[k] * model.W2.at(k, 0);
                p[1] += hh[k] * model.W2.at(k, 1);
            }
        }
        for (int i = 0; i < n; ++i) {
            double* o = c.O.row(i);
            o[0] = model.b2[0];
            o[1] = model.b2[1];
            const double isi = c.inv_sqrt_deg[i];
            for_each_closed_neighbor(g, i, [&](int l) {
                const double w = isi * c.inv_sqrt_deg[l];
                o[0] += w * c.P2.at(l, 0);
                o[1] += w * c.P2.at(l, 1);
            });
        }
        return c;
    }

    // sage: combine(self, neighbor mean) per layer, isolated nodes use a
    // zero neighbor term.
    c.Ps1 = Matrix(n, h);
    c.Pn1 = Matrix(n, h);
    for (int v = 0; v < n; ++v) {
        feature_row_product(g, model.W1, 0, v, c.Ps1.row(v), h);
        feature_row_product(g, model.W1, model.d, v, c.Pn1.row(v), h);
    }
    c.M1 = Matrix(n, h);
    for (int i = 0; i < n; ++i) {
        const int deg = g.degree(i);
        if (deg == 0) continue;
        double* m = c.M1.row(i);
        for (int j : g.neighbors(i)) {
            const double* p = c.Pn1.row(j);
            for (int k = 0; k < h; ++k) m[k] += p[k];
        }
        for (int k = 0; k < h; ++k) m[k] /= deg;
    }
    for (int i = 0; i < n; ++i) {
        double* z = c.Z1.row(i);
        const double* ps = c.Ps1.row(i);
        const double* m = c.M1.row(i);
        for (int k = 0; k < h; ++k) z[k] = model.b1[k] + ps[k] + m[k];
        double* hh = c.H1.row(i);
        for (int k = 0; k < h; ++k) hh[k] = z[k] > 0.0 ? z[k] : 0.0;
    }
    c.Pn2 = Matrix(n, 2);
    Matrix Ps2(n, 2);
    for (int i = 0; i < n; ++i) {
        const double* hh = c.H1.row(i);
        double* pn = c.Pn2.row(i);
        double* ps = Ps2.row(i);
        for (int k = 0; k < h; ++k) {
            ps[0] += hh[k] * model.W2.at(k, 0);
            ps[1] += hh[k] * model.W2.at(k, 1);
            pn[0] += hh[k] * model.W2.at(h + k, 0);
            pn[1] += hh[k] * model.W2.at(h + k, 1);
        }
    }
    c.M2 = Matrix(n, 2);
    for (int i = 0; i < n; ++i) {
        const int deg = g.degree(i);
        if (deg == 0) continue;
        double* m = c.M2.row(i);
        for (int j : g.neighbors(i)) {
            m[0] += c.Pn2.at(j, 0);
            m[1] += c.Pn2.at(j, 1);
        }
        m[0] /= deg;
        m[1] /= deg;
    }
    for (int i = 0; i < n; ++i) {
        double* o = c.O.row(i);
        o[0] = model.b2[0] + Ps2.at(i, 0) + c.M2.at(i, 0);
        o[1] = model.b2[1] + Ps2.at(i, 1) + c.M2.at(i, 1);
    }
    return c;
}

// ---- Overlay ----

void Overlay::bind(const ModelParams& model, const Graph& graph, const GnnCache& cache) {
    model_ = &model;
    graph_ = &graph;
    cache_ = &cache;
    const size_t n = static_cast<size_t>(graph.n());
    if (extra_.size() < n) {
        extra_.resize(n);
        flips_.resize(n);
        deg_dirty_.assign(n, 0);
        feat_dirty_.assign(n, 0);
    }
    const int h = std::max(model.hidden, 1);
    if (h1_buf_.cols() < h) {
        h1_buf_ = Matrix(1, h);
        p1_buf_ = Matrix(1, h);
        ps1_buf_ = Matrix(1, h);
        pn1_buf_ = Matrix(1, h);
        msum_.assign(h, 0.0);
    }
    clear();
}

void Overlay::touch(int v) {
    if (!deg_dirty_[v] && !feat_dirty_[v]) touched_.push_back(v);
}

void Overlay::add_edge(int u, int v) {
    touch(u);
    touch(v);
    deg_dirty_[u] = 1;
    deg_dirty_[v] = 1;
    extra_[u].insert(std::lower_bound(extra_[u].begin(), extra_[u].end(), v), v);
    extra_[v].insert(std::lower_bound(extra_[v].begin(), extra_[v].end(), u), u);
}

void Overlay::flip_bit(int v, int bit) {
    touch(v);
    feat_dirty_[v] = 1;
    auto& f = flips_[v];
    auto it = std::lower_bound(f.begin(), f.end(), bit);
    if (it != f.end() && *it == bit) f.erase(it);  // double flip cancels
    else f.insert(it, bit);
}

void Overlay::clear() {
    for (int v : touched_) {
        extra_[v].clear();
        flips_[v].clear();
        deg_dirty_[v] = 0;
        feat_dirty_[v] = 0;
    }
    touched_.clear();
}

template <typename F>
void Overlay::for_each_merged_neighbor(int v, F&& f) const {
    const auto& base = graph_->neighbors(v);
    const auto& ext = extra_[v];
    size_t i = 0, j = 0;
    while (i < base.size() || j < ext.size()) {
        if (j == ext.size() || (i < base.size() && base[i] < ext[j])) f(base[i++]);
        else f(ext[j++]);
    }
}

template <typename F>
void Overlay::for_each_merged_closed(int v, F&& f) const {
    bool self_done = false;
    for_each_merged_neighbor(v, [&](int u) {
        if (!self_done && v < u) {
            f(v);
            self_done = true;
        }
        f(u);
    });
    if (!self_done) f(v);
}

bool Overlay::h1_clean(int v) const {
    if (deg_dirty_[v] || feat_dirty_[v]) return false;
    if (model_->backbone == Backbone::gcn) {
        for (int l : graph_->neighbors(v))
            if (deg_dirty_[l] || feat_dirty_[l]) return false;
    } else {
        for (int l : graph_->neighbors(v))
            if (feat_dirty_[l]) return false;
    }
    return true;
}

/// Row of X' W, recomputed over the flipped bit set in ascending order so it
/// matches what a full forward would produce after real application.
const double* Overlay::feature_product_row(const Matrix& W, int row_offset, int v, Matrix& slot, int idx) {
    const int h = model_->hidden;
    double* out = slot.row(idx);
    std::fill(out, out + h, 0.0);
    const auto& base = graph_->feature_bits(v);
    const auto& fl = flips_[v];
    size_t i = 0, j = 0;
    while (i < base.size() || j < fl.size()) {
        int b;
        if (j == fl.size()) b = base[i++];
        else if (i == base.size()) b = fl[j++];
        else if (base[i] < fl[j]) b = base[i++];
        else if (fl[j] < base[i]) b = fl[j++];
        else {  // flipped off
            ++i;
            ++j;
            continue;
        }
        const double* w = W.row(row_offset + b);
        for (int k = 0; k < h; ++k) out[k] += w[k];
    }
    return out;
}

const double* Overlay::h1_row(int v) {
    if (h1_clean(v)) return cache_->H1.row(v);
    const int h = model_->hidden;
    double* z = h1_buf_.row(0);
    if (model_->backbone == Backbone::gcn) {
        for (int k = 0; k < h; ++k) z[k] = model_->b1[k];
        const double isv = 1.0 / std::sqrt(1.0 + degree(v));
        for_each_merged_closed(v, [&](int l) {
            const double w = isv / std::sqrt(1.0 + degree(l));
            const double* p = feat_dirty_[l] ? feature_product_row(model_->W1, 0, l, p1_buf_, 0) : cache_->P1.row(l);
            for (int k = 0; k < h; ++k) z[k] += w * p[k];
        });
    } else {
        const double* ps = feat_dirty_[v] ? feature_product_row(model_->W1, 0, v, ps1_buf_, 0) : cache_->Ps1.row(v);
        const int deg = degree(v);
        std::fill(msum_.begin(), msum_.begin() + h, 0.0);
        for_each_merged_neighbor(v, [&](int l) {
            const double* p = feat_dirty_[l] ? feature_product_row(model_->W1, model_->d, l, pn1_buf_, 0) : cache_->Pn1.row(l);
            for (int k = 0; k < h; ++k) msum_[k] += p[k];
        });
        for (int k = 0; k < h; ++k) z[k] = model_->b1[k] + ps[k] + (deg > 0 ? msum_[k] / deg : 0.0);
    }
    for (int k = 0; k < h; ++k)
        if (z[k] < 0.0) z[k] = 0.0;
    return z;
}

std::array<double, 2> Overlay::logits_at(int v) {
    const int h = model_->hidden;
    std::array<double, 2> o{};
    if (model_->backbone == Backbone::gcn) {
        o[0] = model_->b2[0];
        o[1] = model_->b2[1];
        const double isv = 1.0 / std::sqrt(1.0 + degree(v));
        for_each_merged_closed(v, [&](int l) {
            const double w = isv / std::sqrt(1.0 + degree(l));
            double p0, p1;
            if (h1_clean(l)) {
                p0 = cache_->P2.at(l, 0);
                p1 = cache_->P2.at(l, 1);
            } else {
                const double* hh = h1_row(l);
                p0 = p1 = 0.0;
                for (int k = 0; k < h; ++k) {
                    p0 += hh[k] * model_->W2.at(k, 0);
                    p1 += hh[k] * model_->W2.at(k, 1);
                }
            }
            o[0] += w * p0;
            o[1] += w * p1;
        });
        return o;
    }
    // sage
    double ps0 = 0.0, ps1 = 0.0;
    {
        const double* hh = h1_row(v);
        for (int k = 0; k < h; ++k) {
            ps0 += hh[k] * model_->W2.at(k, 0);
            ps1 += hh[k] * model_->W2.at(k, 1);
        }
    }
    double m0 = 0.0, m1 = 0.0;
    const int deg = degree(v);
    for_each_merged_neighbor(v, [&](int j) {
        double q0, q1;
        if (h1_clean(j)) {
            q0 = cache_->Pn2.at(j, 0);
            q1 = cache_->Pn2.at(j, 1);
        } else {
            const double* hh = h1_row(j);
            q0 = q1 = 0.0;
            for (int k = 0; k < h; ++k) {
                q0 += hh[k] * model_->W2.at(h + k, 0);
                q1 += hh[k] * model_->W2.at(h + k, 1);
            }
        }
        m0 += q0;
        m1 += q1;
    });
    o[0] = model_->b2[0] + ps0 + (deg > 0 ? m0 / deg : 0.0);
    o[1] = model_->b2[1] + ps1 + (deg > 0 ? m1 / deg : 0.0);
    return o;
}

int Overlay::predict_at(int v) {
    const auto o = logits_at(v);
    return o[1] > o[0] ? 1 : 0;
}

}  // namespace detail

Matrix forward(const ModelParams& model, const Graph& graph) {
    return detail::build_cache(model, graph).O;
}

std::vector<int> predict_from_logits(const Matrix& logits) {
    std::vector<int> out(logits.rows());
    for (int v = 0; v < logits.rows(); ++v) out[v] = logits.at(v, 1) > logits.at(v, 0) ? 1 : 0;
    return out;
}

std::vector<int> predict(const ModelParams& model, const Graph& graph) {
    return predict_from_logits(forward(model, graph));
}

double accuracy(const std::vector<int>& predicted, const Graph& graph, const std::vector<int>& nodes) {
    if (nodes.empty()) return 0.0;
    int hit = 0;
    for (int v : nodes)
        if (predicted[v] == graph.label(v)) ++hit;
    return static_cast<double>(hit) / static_cast<double>(nodes.size());
}

double loss_value(const ModelParams& model, const Graph& graph, const LossSpec& spec) {
    const Matrix O = forward(model, graph);
    if (spec.kind == LossSpec::Kind::attack_ce) {
        const double o0 = O.at(spec.node, 0), o1 = O.at(spec.node, 1);
        const double m = std::max(o0, o1);
        // -ln softmax_1
        return -(o1 - m) + std::log(std::exp(o0 - m) + std::exp(o1 - m));
    }
    double s = 0.0;
    for (int w : spec.targets) {
        if (w == spec.node) continue;
        switch (spec.term) {
            case LossSpec::Term::margin: s += O.at(w, 0) - O.at(w, 1); break;
            case LossSpec::Term::class0: s += O.at(w, 0); break;
            case LossSpec::Term::neg_class1: s += -O.at(w, 1); break;
        }
    }
    return s;
}

namespace {

json matrix_to_json(const Matrix& m) {
    json rows = json::array();
    for (int i = 0; i < m.rows(); ++i) rows.push_back(std::vector<double>(m.row(i), m.row(i) + m.cols()));
    return rows;
}

Matrix matrix_from_json(const json& rows, const std::string& what) {
    if (!rows.is_array() || rows.empty()) throw SchemaError("schema error: bad matrix '" + what + "'");
    const int r = static_cast<int>(rows.size());
    const int c = static_cast<int>(rows[0].size());
    Matrix m(r, c);
    for (int i = 0; i < r; ++i) {
        if (static_cast<int>(rows[i].size()) != c) throw SchemaError("schema error: ragged matrix '" + what + "'");
        for (int j = 0; j < c; ++j) m.at(i, j) = rows[i][j].get<double>();
    }
    return m;
}

}  // namespace

void save_model(const ModelParams& model, const std::string& path) {
    json doc;
    doc["backbone"] = to_string(model.backbone);
    doc["d"] = model.d;
    doc["hidden"] = model.hidden;
    doc["W1"] = matrix_to_json(model.W1);
    doc["W2"] = matrix_to_json(model.W2);
    doc["b1"] = model.b1;
    doc["b2"] = model.b2;
    doc["training_meta"] = {{"epochs_run", model.meta.epochs_run},
                            {"best_epoch", model.meta.best_epoch},
                            {"best_val_acc", model.meta.best_val_acc}};
    std::ofstream out(path);
    if (!out) throw SchemaError("cannot write " + path);
    out << doc.dump() << "\n";
}

ModelParams load_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw SchemaError("cannot open " + path);
    json doc;
    try {
        in >> doc;
    } catch (const json::parse_error& e) {
        throw SchemaError("schema error in " + path + ": " + e.what());
    }
    ModelParams m;
    m.backbone = backbone_from_string(doc.at("backbone").get<std::string>());
    m.d = doc.at("d").get<int>();
    m.hidden = doc.at("hidden").get<int>();
    m.W1 = matrix_from_json(doc.at("W1"), "W1");
    m.W2 = matrix_from_json(doc.at("W2"), "W2");
    m.b1 = doc.at("b1").get<std::vector<double>>();
    m.b2 = doc.at("b2").get<std::vector<double>>();
    if (doc.contains("training_meta")) {
        m.meta.epochs_run = doc["training_meta"].value("epochs_run", 0);
        m.meta.best_epoch = doc["training_meta"].value("best_epoch", 0);
        m.meta.best_val_acc = doc["training_meta"].value("best_val_acc", 0.0);
    }
    const int exp_w1_rows = m.backbone == Backbone::gcn ? m.d : 2 * m.d;
    const int exp_w2_rows = m.backbone == Backbone::gcn ? m.hidden : 2 * m.hidden;
    if (m.W1.rows() != exp_w1_rows || m.W1.cols() != m.hidden || m.W2.rows() != exp_w2_rows || m.W2.cols() != 2)
        throw ValidationError("validation error: model weight shapes inconsistent with backbone/d/hidden");
    return m;
}

}  // namespace canvass
