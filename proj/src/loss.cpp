#include "cpalign/loss.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <json.hpp>

#include "cpalign/error.hpp"

namespace cpalign {

namespace {

// Norm floor for gradient denominators only; loss values use true norms.
constexpr double kNormEps = 1e-12;

std::string instance_name(const InstanceFeature& f) {
    return "instance " + std::to_string(f.instance_index) + " of image '" + f.image_id +
           "' at level " + std::to_string(f.level);
}

/// Dimension agreement, finiteness, and a nonzero norm for every vector.
std::size_t validate_instances(const std::vector<InstanceFeature>& xs) {
    if (xs.empty()) return 0;
    const std::size_t dim = xs[0].vector.size();
    if (dim == 0) throw ValidationError("loss: empty feature vector in " + instance_name(xs[0]));
    for (const auto& f : xs) {
        if (f.vector.size() != dim)
            throw ValidationError("loss: vector length mismatch (" +
                                  std::to_string(f.vector.size()) + " vs " + std::to_string(dim) +
                                  ") in " + instance_name(f));
        if (f.class_id < 0)
            throw ValidationError("loss: negative class_id in " + instance_name(f));
        double sq = 0.0;
        for (const double v : f.vector) {
            if (!std::isfinite(v))
                throw ValidationError("loss: non-finite feature value in " + instance_name(f));
            sq += v * v;
        }
        if (sq == 0.0)
            throw ValidationError("loss: zero-norm feature vector in " + instance_name(f));
    }
    return dim;
}

/// Content-based total order: class ascending, then vector lexicographic,
/// then the remaining identity fields. Summing in this order makes every
/// result a function of the instance multiset, not of the input order.
std::vector<std::size_t> canonical_order(const std::vector<InstanceFeature>& xs) {
    std::vector<std::size_t> idx(xs.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::sort(idx.begin(), idx.end(), [&xs](std::size_t a, std::size_t b) {
        const InstanceFeature& A = xs[a];
        const InstanceFeature& B = xs[b];
        if (A.class_id != B.class_id) return A.class_id < B.class_id;
        if (A.vector != B.vector) return A.vector < B.vector;
        if (A.domain != B.domain) return A.domain < B.domain;
        if (A.level != B.level) return A.level < B.level;
        if (A.image_id != B.image_id) return A.image_id < B.image_id;
        return A.instance_index < B.instance_index;
    });
    return idx;
}

/// Half-open [begin, end) runs of equal class_id over the sorted index list.
std::vector<std::pair<std::size_t, std::size_t>>
class_runs(const std::vector<InstanceFeature>& xs, const std::vector<std::size_t>& order) {
    std::vector<std::pair<std::size_t, std::size_t>> runs;
    std::size_t s = 0;
    while (s < order.size()) {
        std::size_t e = s + 1;
        while (e < order.size() && xs[order[e]].class_id == xs[order[s]].class_id) ++e;
        runs.emplace_back(s, e);
        s = e;
    }
    return runs;
}

double norm(const std::vector<double>& v) {
    double sq = 0.0;
    for (const double x : v) sq += x * x;
    return std::sqrt(sq);
}

double dot(const std::vector<double>& u, const std::vector<double>& w) {
    double d = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) d += u[i] * w[i];
    return d;
}

struct CosGrad {
    double value = 0.0;
    std::vector<double> du, dw;
};

/// cos(u, w) with d(cos)/du = w/(|u||w|) - cos * u/|u|^2 and symmetrically
/// for w. Denominators are floored at kNormEps.
CosGrad cosine_with_grad(const std::vector<double>& u, const std::vector<double>& w) {
    CosGrad out;
    const double nu = norm(u);
    const double nw = norm(w);
    out.value = dot(u, w) / (nu * nw);
    const double gu = std::max(nu, kNormEps);
    const double gw = std::max(nw, kNormEps);
    out.du.resize(u.size());
    out.dw.resize(w.size());
    for (std::size_t i = 0; i < u.size(); ++i) {
        out.du[i] = w[i] / (gu * gw) - out.value * u[i] / (gu * gu);
        out.dw[i] = u[i] / (gu * gw) - out.value * w[i] / (gw * gw);
    }
    return out;
}

void axpy(std::vector<double>& y, double a, const std::vector<double>& x) {
    for (std::size_t i = 0; i < y.size(); ++i) y[i] += a * x[i];
}

}  // namespace

void LossConfig::validate() const {
    if (!(lambda_sim >= 0.0) || !(lambda_dis >= 0.0) || !(lambda_cls >= 0.0))
        throw ValidationError("LossConfig: weights must be non-negative and finite");
    if (!(margin >= -1.0 && margin <= 1.0))
        throw ValidationError("LossConfig: margin must lie in [-1, 1]");
}

ClassifierHead ClassifierHead::zeros(int num_classes, int dim) {
    ClassifierHead h;
    h.num_classes = num_classes;
    h.dim = dim;
    h.weights.assign(static_cast<std::size_t>(num_classes) * dim, 0.0);
    h.bias.assign(static_cast<std::size_t>(num_classes), 0.0);
    return h;
}

void ClassifierHead::validate() const {
    if (num_classes < 1 || dim < 1)
        throw ValidationError("ClassifierHead: num_classes and dim must be positive");
    if (weights.size() != static_cast<std::size_t>(num_classes) * dim ||
        bias.size() != static_cast<std::size_t>(num_classes))
        throw ValidationError("ClassifierHead: parameter sizes do not match num_classes x dim");
    for (const double v : weights)
        if (!std::isfinite(v)) throw ValidationError("ClassifierHead: non-finite weight");
    for (const double v : bias)
        if (!std::isfinite(v)) throw ValidationError("ClassifierHead: non-finite bias");
}

SingleLossResult similarity_loss(const std::vector<InstanceFeature>& instances,
                                 SimilarityForm form) {
    const std::size_t dim = validate_instances(instances);
    SingleLossResult out;
    out.grads.assign(instances.size(), std::vector<double>(dim, 0.0));
    if (instances.empty()) return out;

    const auto order = canonical_order(instances);
    for (const auto& [s, e] : class_runs(instances, order)) {
        const std::size_t n = e - s;
        if (n < 2) continue;
        const double pairs = static_cast<double>(n) * (n - 1) / 2.0;
        for (std::size_t k = s; k < e; ++k) {
            for (std::size_t l = k + 1; l < e; ++l) {
                const std::size_t a = order[k];
                const std::size_t b = order[l];
                const CosGrad cg = cosine_with_grad(instances[a].vector, instances[b].vector);
                if (form == SimilarityForm::one_minus_cos) {
                    out.value += (1.0 - cg.value) / pairs;
                    axpy(out.grads[a], -1.0 / pairs, cg.du);
                    axpy(out.grads[b], -1.0 / pairs, cg.dw);
                } else {
                    out.value += cg.value / pairs;
                    axpy(out.grads[a], 1.0 / pairs, cg.du);
                    axpy(out.grads[b], 1.0 / pairs, cg.dw);
                }
            }
        }
    }
    return out;
}

SingleLossResult dissimilarity_loss(const std::vector<InstanceFeature>& instances, double margin) {
    if (!(margin >= -1.0 && margin <= 1.0))
        throw ValidationError("dissimilarity_loss: margin must lie in [-1, 1]");
    const std::size_t dim = validate_instances(instances);
    SingleLossResult out;
    out.grads.assign(instances.size(), std::vector<double>(dim, 0.0));
    if (instances.empty()) return out;

    const auto order = canonical_order(instances);
    const auto runs = class_runs(instances, order);

    std::vector<std::vector<double>> means;
    means.reserve(runs.size());
    for (const auto& [s, e] : runs) {
        std::vector<double> m(dim, 0.0);
        for (std::size_t k = s; k < e; ++k) axpy(m, 1.0, instances[order[k]].vector);
        const double inv = 1.0 / static_cast<double>(e - s);
        for (auto& v : m) v *= inv;
        means.push_back(std::move(m));
    }

    for (std::size_t i = 0; i < runs.size(); ++i) {
        for (std::size_t j = i + 1; j < runs.size(); ++j) {
            const CosGrad cg = cosine_with_grad(means[i], means[j]);
            const double excess = cg.value - margin;
            if (excess <= 0.0) continue;  // inactive hinge, boundary included
            out.value += excess;
            // chain through the class means: d(mean)/d(member) = 1/n
            const double inv_i = 1.0 / static_cast<double>(runs[i].second - runs[i].first);
            const double inv_j = 1.0 / static_cast<double>(runs[j].second - runs[j].first);
            for (std::size_t k = runs[i].first; k < runs[i].second; ++k)
                axpy(out.grads[order[k]], inv_i, cg.du);
            for (std::size_t k = runs[j].first; k < runs[j].second; ++k)
                axpy(out.grads[order[k]], inv_j, cg.dw);
        }
    }
    return out;
}

ClassificationLossResult classification_loss(const std::vector<InstanceFeature>& instances,
                                             const ClassifierHead& head) {
    head.validate();
    const std::size_t dim = validate_instances(instances);
    ClassificationLossResult out;
    out.grads.assign(instances.size(), std::vector<double>(dim, 0.0));
    out.head_grad.weights.assign(head.weights.size(), 0.0);
    out.head_grad.bias.assign(head.bias.size(), 0.0);
    if (instances.empty()) return out;
    if (dim != static_cast<std::size_t>(head.dim))
        throw ValidationError("classification_loss: head dim " + std::to_string(head.dim) +
                              " does not match feature dim " + std::to_string(dim));

    const auto order = canonical_order(instances);
    const int C = head.num_classes;
    std::vector<double> z(static_cast<std::size_t>(C));
    std::vector<double> p(static_cast<std::size_t>(C));

    for (const auto& [s, e] : class_runs(instances, order)) {
        const double inv_n = 1.0 / static_cast<double>(e - s);
        for (std::size_t k = s; k < e; ++k) {
            const InstanceFeature& f = instances[order[k]];
            if (f.class_id >= C)
                throw ValidationError("classification_loss: class_id " +
                                      std::to_string(f.class_id) + " outside head range in " +
                                      instance_name(f));
            for (int j = 0; j < C; ++j) {
                double acc = head.bias[j];
                for (std::size_t d = 0; d < dim; ++d) acc += head.w(j, static_cast<int>(d)) * f.vector[d];
                z[j] = acc;
            }
            const double zmax = *std::max_element(z.begin(), z.end());
            double denom = 0.0;
            for (int j = 0; j < C; ++j) {
                p[j] = std::exp(z[j] - zmax);
                denom += p[j];
            }
            for (int j = 0; j < C; ++j) p[j] /= denom;
            out.value += (std::log(denom) - (z[f.class_id] - zmax)) * inv_n;

            for (int j = 0; j < C; ++j) {
                const double dz = (p[j] - (j == f.class_id ? 1.0 : 0.0)) * inv_n;
                out.head_grad.bias[j] += dz;
                auto* wrow = &out.head_grad.weights[static_cast<std::size_t>(j) * dim];
                const auto* hrow = &head.weights[static_cast<std::size_t>(j) * dim];
                auto& g = out.grads[order[k]];
                for (std::size_t d = 0; d < dim; ++d) {
                    wrow[d] += dz * f.vector[d];
                    g[d] += hrow[d] * dz;
                }
            }
        }
    }
    return out;
}

MultiLevelLossResult
i2da_loss(const std::array<std::vector<InstanceFeature>, kNumFeatureLevels>& levels,
          const std::array<ClassifierHead, kNumFeatureLevels>& heads, const LossConfig& cfg) {
    cfg.validate();
    MultiLevelLossResult out;
    constexpr double kLevels = static_cast<double>(kNumFeatureLevels);

    for (int lvl = 0; lvl < kNumFeatureLevels; ++lvl) {
        const auto& xs = levels[lvl];
        const SingleLossResult sim = similarity_loss(xs, cfg.similarity_form);
        const SingleLossResult dis = dissimilarity_loss(xs, cfg.margin);
        const ClassificationLossResult cls = classification_loss(xs, heads[lvl]);

        out.per_level[lvl] = {sim.value, dis.value, cls.value};

        auto& g = out.grads[lvl];
        g.assign(xs.size(), std::vector<double>(xs.empty() ? 0 : xs[0].vector.size(), 0.0));
        for (std::size_t i = 0; i < xs.size(); ++i) {
            for (std::size_t d = 0; d < g[i].size(); ++d) {
                g[i][d] = (cfg.lambda_sim * sim.grads[i][d] + cfg.lambda_dis * dis.grads[i][d] +
                           cfg.lambda_cls * cls.grads[i][d]) /
                          kLevels;
            }
        }
        out.head_grads[lvl].weights.assign(cls.head_grad.weights.size(), 0.0);
        out.head_grads[lvl].bias.assign(cls.head_grad.bias.size(), 0.0);
        for (std::size_t i = 0; i < cls.head_grad.weights.size(); ++i)
            out.head_grads[lvl].weights[i] = cfg.lambda_cls * cls.head_grad.weights[i] / kLevels;
        for (std::size_t i = 0; i < cls.head_grad.bias.size(); ++i)
            out.head_grads[lvl].bias[i] = cfg.lambda_cls * cls.head_grad.bias[i] / kLevels;
    }

    for (int lvl = 0; lvl < kNumFeatureLevels; ++lvl) {
        out.similarity += out.per_level[lvl].similarity / kLevels;
        out.dissimilarity += out.per_level[lvl].dissimilarity / kLevels;
        out.classification += out.per_level[lvl].classification / kLevels;
    }
    out.total = cfg.lambda_sim * out.similarity + cfg.lambda_dis * out.dissimilarity +
                cfg.lambda_cls * out.classification;
    return out;
}

BatchLossResult i2da_loss_on_batch(const std::vector<MultiLevelFeatures>& batch,
                                   const std::array<ClassifierHead, kNumFeatureLevels>& heads,
                                   const LossConfig& cfg, int grid_size) {
    BatchLossResult out;
    for (const auto& rec : batch) {
        for (auto& feat : pool_instances(rec, grid_size)) {
            const int lvl = feat.level;
            out.instances[lvl].push_back(std::move(feat));
        }
    }
    out.result = i2da_loss(out.instances, heads, cfg);
    return out;
}

std::string to_json(const MultiLevelLossResult& result, int indent) {
    nlohmann::json j;
    j["similarity"] = result.similarity;
    j["dissimilarity"] = result.dissimilarity;
    j["classification"] = result.classification;
    j["total"] = result.total;
    j["per_level"] = nlohmann::json::array();
    for (const auto& lvl : result.per_level) {
        j["per_level"].push_back({{"similarity", lvl.similarity},
                                  {"dissimilarity", lvl.dissimilarity},
                                  {"classification", lvl.classification}});
    }
    double grad_sq = 0.0;
    std::size_t grad_count = 0;
    for (const auto& level : result.grads) {
        for (const auto& g : level) {
            for (const double v : g) grad_sq += v * v;
            ++grad_count;
        }
    }
    j["instance_count"] = grad_count;
    j["grad_norm"] = std::sqrt(grad_sq);
    return j.dump(indent);
}

}  // namespace cpalign
