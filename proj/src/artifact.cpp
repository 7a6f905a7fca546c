#include "fdrmix/artifact.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

namespace fdrmix {

using nlohmann::json;

std::string FitArtifact::to_json() const {
    json j;
    j["format_version"] = 1;
    j["dim"] = dim;
    if (dim == 1) {
        const MixtureModel1D& m = *model1;
        j["p0"] = m.p0;
        j["null"] = {{"mu", m.mu}, {"tau2", m.tau2}};
        j["alternative"] = {{"knots", m.alternative.base().knots},
                            {"log_values", m.alternative.base().log_values},
                            {"bandwidth", m.alternative.bandwidth()}};
    } else {
        const MixtureModel2D& m = *model2;
        j["p0"] = m.p0;
        j["null"] = {{"mean", {m.mu.x, m.mu.y}},
                     {"cov", {{m.cov.xx, m.cov.xy}, {m.cov.xy, m.cov.yy}}}};
        json verts = json::array();
        for (const Vec2& v : m.alternative.base().vertices) verts.push_back({v.x, v.y});
        json tris = json::array();
        for (const auto& t : m.alternative.base().triangles) tris.push_back({t[0], t[1], t[2]});
        const Mat2& A = m.alternative.bandwidth();
        j["alternative"] = {{"vertices", verts},
                            {"log_values", m.alternative.base().log_values},
                            {"triangles", tris},
                            {"bandwidth_matrix", {{A.xx, A.xy}, {A.xy, A.yy}}}};
    }
    j["fit"] = {{"iterations", meta.iterations},
                {"converged", meta.converged},
                {"log_likelihood", meta.log_likelihood},
                {"init_fallback", meta.init_fallback},
                {"mle_failures", meta.mle_failures},
                {"likelihood_dips", meta.likelihood_dips}};
    return j.dump(2) + "\n";
}

FitArtifact FitArtifact::from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw parse_error(0, std::string("artifact: invalid JSON: ") + e.what());
    }
    try {
        if (j.at("format_version").get<int>() != 1) {
            throw parse_error(0, "artifact: unsupported format_version");
        }
        FitArtifact a;
        a.dim = j.at("dim").get<int>();
        const json& alt = j.at("alternative");
        if (a.dim == 1) {
            MixtureModel1D m;
            m.p0 = j.at("p0").get<double>();
            m.mu = j.at("null").at("mu").get<double>();
            m.tau2 = j.at("null").at("tau2").get<double>();
            PiecewiseLogLinearDensity base;
            base.knots = alt.at("knots").get<std::vector<double>>();
            base.log_values = alt.at("log_values").get<std::vector<double>>();
            m.alternative = SmoothedLogConcave(std::move(base), alt.at("bandwidth").get<double>());
            a.model1 = std::move(m);
        } else if (a.dim == 2) {
            MixtureModel2D m;
            m.p0 = j.at("p0").get<double>();
            const json& nul = j.at("null");
            m.mu = {nul.at("mean").at(0).get<double>(), nul.at("mean").at(1).get<double>()};
            m.cov = {nul.at("cov").at(0).at(0).get<double>(),
                     nul.at("cov").at(0).at(1).get<double>(),
                     nul.at("cov").at(1).at(1).get<double>()};
            TentDensity2D base;
            for (const json& v : alt.at("vertices")) {
                base.vertices.push_back({v.at(0).get<double>(), v.at(1).get<double>()});
            }
            base.log_values = alt.at("log_values").get<std::vector<double>>();
            for (const json& t : alt.at("triangles")) {
                base.triangles.push_back(
                    {t.at(0).get<int>(), t.at(1).get<int>(), t.at(2).get<int>()});
            }
            const json& bw = alt.at("bandwidth_matrix");
            const Mat2 A{bw.at(0).at(0).get<double>(), bw.at(0).at(1).get<double>(),
                         bw.at(1).at(1).get<double>()};
            m.alternative = SmoothedTent2D(std::move(base), A);
            a.model2 = std::move(m);
        } else {
            throw parse_error(0, "artifact: dim must be 1 or 2");
        }
        const json& f = j.at("fit");
        a.meta.iterations = f.at("iterations").get<int>();
        a.meta.converged = f.at("converged").get<bool>();
        a.meta.log_likelihood = f.at("log_likelihood").get<double>();
        a.meta.init_fallback = f.value("init_fallback", false);
        a.meta.mle_failures = f.value("mle_failures", 0);
        a.meta.likelihood_dips = f.value("likelihood_dips", 0);
        return a;
    } catch (const json::exception& e) {
        throw parse_error(0, std::string("artifact: missing or malformed field: ") + e.what());
    }
}

void FitArtifact::save(const std::string& path) const {
    std::ofstream f(path);
    if (!f) throw io_error("cannot open for writing: " + path);
    f << to_json();
    if (!f) throw io_error("write failed: " + path);
}

FitArtifact FitArtifact::load(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw io_error("cannot open: " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return from_json(ss.str());
}

} // namespace fdrmix
