#include <algorithm>
#include <cmath>

#include "gnn_kernels.hpp"

namespace canvass {

namespace detail {

void fill_loss_grad_rows(const LossSpec& spec, const GnnCache& cache, Matrix& G_O, std::vector<uint8_t>& go_nz) {
    if (spec.kind == LossSpec::Kind::attack_ce) {
        const int v = spec.node;
        const double o0 = cache.O.at(v, 0), o1 = cache.O.at(v, 1);
        const double m = std::max(o0, o1);
        const double e0 = std::exp(o0 - m), e1 = std::exp(o1 - m);
        const double p0 = e0 / (e0 + e1), p1 = e1 / (e0 + e1);
        G_O.at(v, 0) = p0;
        G_O.at(v, 1) = p1 - 1.0;
        go_nz[v] = 1;
        return;
    }
    for (int w : spec.targets) {
        if (w == spec.node) continue;
        switch (spec.term) {
            case LossSpec::Term::margin:
                G_O.at(w, 0) = 1.0;
                G_O.at(w, 1) = -1.0;
                break;
            case LossSpec::Term::class0: G_O.at(w, 0) = 1.0; break;
            case LossSpec::Term::neg_class1: G_O.at(w, 1) = -1.0; break;
        }
        go_nz[w] = 1;
    }
}

double GradContext::dA(int i, int j) const {
    const int h = model->hidden;
    if (model->backbone == Backbone::gcn) {
        double ga = 0.0;
        if (go_nz[i]) ga += G_O.at(i, 0) * cache->P2.at(j, 0) + G_O.at(i, 1) * cache->P2.at(j, 1);
        if (gz_nz[i]) ga += dot(G_Z1.row(i), cache->P1.row(j), h);
        return ga * cache->inv_sqrt_deg[i] * cache->inv_sqrt_deg[j] + gdeg[i];
    }
    const int deg = graph->degree(i);
    if (deg == 0) return 0.0;
    double s = 0.0;
    if (gz_nz[i]) s += dot(G_Z1.row(i), cache->Pn1.row(j), h) - c1[i];
    if (go_nz[i]) s += G_O.at(i, 0) * cache->Pn2.at(j, 0) + G_O.at(i, 1) * cache->Pn2.at(j, 1) - c2[i];
    return s / deg;
}

bool GradContext::dX_pullback(int s, double* self_or_sum, double* neigh) const {
    const int h = model->hidden;
    std::fill(self_or_sum, self_or_sum + h, 0.0);
    bool any = false;
    if (model->backbone == Backbone::gcn) {
        const double iss = cache->inv_sqrt_deg[s];
        for_each_closed_neighbor(*graph, s, [&](int l) {
            if (!gz_nz[l]) return;
            any = true;
            const double w = iss * cache->inv_sqrt_deg[l];
            const double* gz = G_Z1.row(l);
            for (int k = 0; k < h; ++k) self_or_sum[k] += w * gz[k];
        });
        return any;
    }
    std::fill(neigh, neigh + h, 0.0);
    if (gz_nz[s]) {
        const double* gz = G_Z1.row(s);
        for (int k = 0; k < h; ++k) self_or_sum[k] = gz[k];
        any = true;
    }
    for (int l : graph->neighbors(s)) {
        if (!gz_nz[l]) continue;
        const int deg_l = graph->degree(l);
        if (deg_l == 0) continue;
        any = true;
        const double* gz = G_Z1.row(l);
        for (int k = 0; k < h; ++k) neigh[k] += gz[k] / deg_l;
    }
    return any;
}

double GradContext::feature_score_from_pullback(const double* self_or_sum, const double* neigh, int bit) const {
    const int h = model->hidden;
    if (model->backbone == Backbone::gcn) return dot(self_or_sum, model->W1.row(bit), h);
    return dot(self_or_sum, model->W1.row(bit), h) + dot(neigh, model->W1.row(model->d + bit), h);
}

void GradContext::dX_row(int s, double* out) const {
    const int h = model->hidden;
    const int d = model->d;
    std::fill(out, out + d, 0.0);
    std::vector<double> buf(2 * static_cast<size_t>(h), 0.0);
    if (!dX_pullback(s, buf.data(), buf.data() + h)) return;
    for (int b = 0; b < d; ++b) out[b] = feature_score_from_pullback(buf.data(), buf.data() + h, b);
}

void build_grad_into(GradContext& ctx, const ModelParams& model, const Graph& g, const GnnCache& cache,
                     const LossSpec& spec) {
    const int n = g.n();
    const int h = model.hidden;
    ctx.model = &model;
    ctx.graph = &g;
    ctx.cache = &cache;
    ctx.G_O.reset(n, 2);
    ctx.G_Z1.reset(n, h);
    ctx.go_nz.assign(n, 0);
    ctx.gz_nz.assign(n, 0);
    ctx.dA_row_support.assign(n, 0);
    ctx.dX_row_support.assign(n, 0);

    fill_loss_grad_rows(spec, cache, ctx.G_O, ctx.go_nz);

    if (model.backbone == Backbone::gcn) {
        // dL/dH1 = A_hat G_O W2^T, scattered from the nonzero G_O rows.
        Matrix& tmp2 = ctx.scratch2;
        tmp2.reset(n, 2);
        std::vector<uint8_t> tmp_nz(n, 0);
        for (int j = 0; j < n; ++j) {
            if (!ctx.go_nz[j]) continue;
            const double isj = cache.inv_sqrt_deg[j];
            const double g0 = ctx.G_O.at(j, 0), g1 = ctx.G_O.at(j, 1);
            for_each_closed_neighbor(g, j, [&](int l) {
                const double w = cache.inv_sqrt_deg[l] * isj;
                tmp2.at(l, 0) += w * g0;
                tmp2.at(l, 1) += w * g1;
                tmp_nz[l] = 1;
            });
        }
        for (int l = 0; l < n; ++l) {
            if (!tmp_nz[l]) continue;
            const double t0 = tmp2.at(l, 0), t1 = tmp2.at(l, 1);
            double* gz = ctx.G_Z1.row(l);
            const double* z = cache.Z1.row(l);
            for (int k = 0; k < h; ++k) {
                if (z[k] > 0.0) gz[k] = t0 * model.W2.at(k, 0) + t1 * model.W2.at(k, 1);
            }
            ctx.gz_nz[l] = 1;
        }
        // degree-term gradient: row+column sums of (G_Ahat ⊙ A_hat)
        ctx.gdeg.assign(n, 0.0);
        std::vector<double> rc(n, 0.0);
        for (int i = 0; i < n && !spec.freeze_normalization; ++i) {
            if (!ctx.go_nz[i] && !ctx.gz_nz[i]) continue;
            const double isi = cache.inv_sqrt_deg[i];
            for_each_closed_neighbor(g, i, [&](int l) {
                double ga = 0.0;
                if (ctx.go_nz[i]) ga += ctx.G_O.at(i, 0) * cache.P2.at(l, 0) + ctx.G_O.at(i, 1) * cache.P2.at(l, 1);
                if (ctx.gz_nz[i]) ga += dot(ctx.G_Z1.row(i), cache.P1.row(l), h);
                const double w = ga * isi * cache.inv_sqrt_deg[l];
                rc[i] += w;
                rc[l] += w;
            });
        }
        for (int i = 0; i < n; ++i) {
            if (rc[i] != 0.0) ctx.gdeg[i] = -rc[i] / (2.0 * (1.0 + g.degree(i)));
            ctx.dA_row_support[i] = ctx.go_nz[i] || ctx.gz_nz[i] || ctx.gdeg[i] != 0.0;
        }
        for (int l = 0; l < n; ++l) {
            if (!ctx.gz_nz[l]) continue;
            ctx.dX_row_support[l] = 1;
            for (int s : g.neighbors(l)) ctx.dX_row_support[s] = 1;
        }
        return;
    }

    // sage
    Matrix& dH1 = ctx.scratchH;
    dH1.reset(n, h);
    std::vector<uint8_t> dh_nz(n, 0);
    std::vector<double> vi(h);
    for (int i = 0; i < n; ++i) {
        if (!ctx.go_nz[i]) continue;
        const double g0 = ctx.G_O.at(i, 0), g1 = ctx.G_O.at(i, 1);
        double* dst = dH1.row(i);
        for (int k = 0; k < h; ++k) dst[k] += g0 * model.W2.at(k, 0) + g1 * model.W2.at(k, 1);
        dh_nz[i] = 1;
        const int deg = g.degree(i);
        if (deg == 0) continue;
        for (int k = 0; k < h; ++k) vi[k] = (g0 * model.W2.at(h + k, 0) + g1 * model.W2.at(h + k, 1)) / deg;
        for (int j : g.neighbors(i)) {
            double* dj = dH1.row(j);
            for (int k = 0; k < h; ++k) dj[k] += vi[k];
            dh_nz[j] = 1;
        }
    }
    for (int l = 0; l < n; ++l) {
        if (!dh_nz[l]) continue;
        const double* z = cache.Z1.row(l);
        const double* dh = dH1.row(l);
        double* gz = ctx.G_Z1.row(l);
        for (int k = 0; k < h; ++k)
            if (z[k] > 0.0) gz[k] = dh[k];
        ctx.gz_nz[l] = 1;
    }
    ctx.c1.assign(n, 0.0);
    ctx.c2.assign(n, 0.0);
    for (int i = 0; i < n; ++i) {
        if (!spec.freeze_normalization) {
            if (ctx.gz_nz[i]) ctx.c1[i] = dot(ctx.G_Z1.row(i), cache.M1.row(i), h);
            if (ctx.go_nz[i])
                ctx.c2[i] = ctx.G_O.at(i, 0) * cache.M2.at(i, 0) + ctx.G_O.at(i, 1) * cache.M2.at(i, 1);
        }
        ctx.dA_row_support[i] = g.degree(i) > 0 && (ctx.go_nz[i] || ctx.gz_nz[i]);
    }
    for (int l = 0; l < n; ++l) {
        if (!ctx.gz_nz[l]) continue;
        ctx.dX_row_support[l] = 1;
        if (g.degree(l) > 0)
            for (int s : g.neighbors(l)) ctx.dX_row_support[s] = 1;
    }
}

GradContext build_grad(const ModelParams& model, const Graph& g, const GnnCache& cache, const LossSpec& spec) {
    GradContext ctx;
    build_grad_into(ctx, model, g, cache, spec);
    return ctx;
}

}  // namespace detail

InputGradients input_gradients(const ModelParams& model, const Graph& graph, const LossSpec& spec) {
    const detail::GnnCache cache = detail::build_cache(model, graph);
    const detail::GradContext ctx = detail::build_grad(model, graph, cache, spec);
    const int n = graph.n();
    InputGradients out;
    out.dA = Matrix(n, n);
    out.dX = Matrix(n, graph.d());
    for (int i = 0; i < n; ++i) {
        if (!ctx.dA_row_support[i]) continue;
        for (int j = 0; j < n; ++j) out.dA.at(i, j) = ctx.dA(i, j);
    }
    for (int s = 0; s < n; ++s) {
        if (!ctx.dX_row_support[s]) continue;
        ctx.dX_row(s, out.dX.row(s));
    }
    return out;
}

}  // namespace canvass
