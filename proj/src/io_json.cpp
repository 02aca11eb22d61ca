#include "doa/io_json.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace doa {

using nlohmann::json;

namespace {

json cplx_to_json(const cplx& c) { return json::array({c.real(), c.imag()}); }

cplx cplx_from_json(const json& j) {
    if (!j.is_array() || j.size() != 2) throw std::invalid_argument("expected [re, im] pair");
    return cplx(j[0].get<double>(), j[1].get<double>());
}

}  // namespace

std::string snapshot_to_json(const Snapshot& x) {
    json j;
    j["m"] = x.m();
    json arr = json::array();
    for (int k = 0; k < x.m(); ++k) arr.push_back(cplx_to_json(x.x[k]));
    j["x"] = arr;
    return j.dump(2) + "\n";
}

Snapshot snapshot_from_json(const std::string& text) {
    const json j = json::parse(text);
    const int m = j.at("m").get<int>();
    const auto& arr = j.at("x");
    if (!arr.is_array() || static_cast<int>(arr.size()) != m)
        throw std::invalid_argument("snapshot: x length does not match m");
    Snapshot out;
    out.x.resize(m);
    for (int k = 0; k < m; ++k) out.x[k] = cplx_from_json(arr[k]);
    return out;
}

std::string scenario_to_json(const Scenario& sc) {
    json j;
    j["m"] = sc.m;
    j["dogs"] = sc.doas;
    json amps = json::array();
    for (const cplx& a : sc.amplitudes) amps.push_back(cplx_to_json(a));
    j["amplitudes"] = amps;
    j["noise_std"] = sc.noise_std;
    j["seed"] = sc.seed;
    return j.dump(2) + "\n";
}

Scenario scenario_from_json(const std::string& text) {
    const json j = json::parse(text);
    Scenario sc;
    sc.m = j.at("m").get<int>();
    sc.doas = j.at("dogs").get<std::vector<double>>();
    for (const auto& a : j.at("amplitudes")) sc.amplitudes.push_back(cplx_from_json(a));
    sc.noise_std = j.value("noise_std", 0.0);
    sc.seed = j.value("seed", std::uint64_t(0));
    sc.validate();
    return sc;
}

std::string report_to_json(const EstimateReport& rep, bool with_timing,
                           const EstimatorOptions* opts) {
    json j;
    j["method"] = method_name(rep.method);
    if (opts) {
        json o;
        o["n"] = opts->n;
        if (rep.method == Method::CLassoH) o["mu"] = opts->mu;
        if (rep.method != Method::Ml && rep.method != Method::Relax)
            o["report_lambda_factor"] = opts->report_lambda_factor;
        if (rep.method == Method::SpsLasso) o["grid_size"] = opts->grid_size;
        j["options"] = o;
    }
    j["status"] = status_name(rep.status);
    j["dogs"] = rep.doas;
    json amps = json::array();
    for (const cplx& a : rep.amplitudes) amps.push_back(cplx_to_json(a));
    j["amplitudes"] = amps;
    json path = json::array();
    for (auto [lam, k] : rep.lambda_path) path.push_back(json::array({lam, k}));
    j["lambda_path"] = path;
    json births = json::array();
    for (auto [lam, phi] : rep.births) births.push_back(json::array({lam, phi}));
    j["births"] = births;
    j["iterations"] = rep.iterations;
    j["wall_time_ms"] = with_timing ? rep.wall_time_ms : 0.0;
    if (!rep.message.empty()) j["message"] = rep.message;
    return j.dump(2) + "\n";
}

EstimateReport report_from_json(const std::string& text) {
    const json j = json::parse(text);
    EstimateReport rep;
    const auto method = method_from_name(j.at("method").get<std::string>());
    if (!method) throw std::invalid_argument("report: unknown method");
    rep.method = *method;
    const std::string st = j.at("status").get<std::string>();
    if (st == "Converged") rep.status = EstStatus::Converged;
    else if (st == "Undefined") rep.status = EstStatus::Undefined;
    else rep.status = EstStatus::Failed;
    rep.doas = j.at("dogs").get<std::vector<double>>();
    for (const auto& a : j.at("amplitudes")) rep.amplitudes.push_back(cplx_from_json(a));
    if (j.contains("lambda_path")) {
        for (const auto& e : j["lambda_path"])
            rep.lambda_path.emplace_back(e[0].get<double>(), e[1].get<int>());
    }
    if (j.contains("births")) {
        for (const auto& e : j["births"])
            rep.births.emplace_back(e[0].get<double>(), e[1].get<double>());
    }
    rep.iterations = j.value("iterations", 0);
    rep.wall_time_ms = j.value("wall_time_ms", 0.0);
    return rep;
}

SweepSpec sweep_from_json(const std::string& text) {
    const json j = json::parse(text);
    SweepSpec spec;
    spec.name = j.value("name", std::string("custom"));
    {
        json sc = j.at("base");
        spec.base.m = sc.at("m").get<int>();
        spec.base.doas = sc.at("dogs").get<std::vector<double>>();
        for (const auto& a : sc.at("amplitudes")) spec.base.amplitudes.push_back(cplx_from_json(a));
        spec.base.noise_std = sc.value("noise_std", 0.0);
        spec.base.seed = sc.value("seed", std::uint64_t(0));
    }
    const std::string axis = j.at("axis").get<std::string>();
    if (axis == "SNR_dB") spec.axis = SweepAxis::SnrDb;
    else if (axis == "separation") spec.axis = SweepAxis::Separation;
    else throw std::invalid_argument("sweep: axis must be SNR_dB or separation");
    spec.values = j.at("values").get<std::vector<double>>();
    spec.trials = j.at("trials").get<int>();
    for (const auto& mname : j.at("estimators")) {
        const auto m = method_from_name(mname.get<std::string>());
        if (!m) throw std::invalid_argument("sweep: unknown estimator name");
        spec.methods.push_back(*m);
    }
    spec.master_seed = j.value("master_seed", std::uint64_t(1));
    if (j.contains("mu")) spec.estimator.mu = j["mu"].get<double>();
    if (j.contains("grid_size")) spec.estimator.grid_size = j["grid_size"].get<int>();
    if (j.contains("report_lambda_factor"))
        spec.estimator.report_lambda_factor = j["report_lambda_factor"].get<double>();
    spec.validate();
    return spec;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file_atomic(const std::string& path, const std::string& content) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot open file for writing: " + tmp);
        out << content;
        if (!out) throw std::runtime_error("write failed: " + tmp);
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0)
        throw std::runtime_error("rename failed: " + path);
}

}  // namespace doa
