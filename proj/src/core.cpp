#include "wm/core.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace wm {

TokenId Vocabulary::add(const std::string& surface) {
    auto it = surface_to_id_.find(surface);
    if (it != surface_to_id_.end()) return it->second;
    TokenId id = static_cast<TokenId>(id_to_surface_.size());
    id_to_surface_.push_back(surface);
    surface_to_id_.emplace(surface, id);
    return id;
}

TokenId Vocabulary::id_of(const std::string& surface) const {
    auto it = surface_to_id_.find(surface);
    return it == surface_to_id_.end() ? TokenId{-1} : it->second;
}

const std::string& Vocabulary::surface_of(TokenId id) const {
    if (id < 0 || static_cast<std::size_t>(id) >= id_to_surface_.size())
        throw std::invalid_argument("Vocabulary::surface_of: id out of range");
    return id_to_surface_[static_cast<std::size_t>(id)];
}

std::string Vocabulary::to_jsonl() const {
    std::ostringstream out;
    for (std::size_t i = 0; i < id_to_surface_.size(); ++i) {
        nlohmann::json j{{"id", i}, {"surface", id_to_surface_[i]}};
        out << j.dump() << '\n';
    }
    return out.str();
}

Vocabulary Vocabulary::from_jsonl(const std::string& text) {
    Vocabulary v;
    std::istringstream in(text);
    std::string line;
    TokenId expect = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto j = nlohmann::json::parse(line);
        if (j.at("id").get<TokenId>() != expect)
            throw std::invalid_argument("Vocabulary::from_jsonl: ids must increase from 0");
        v.add(j.at("surface").get<std::string>());
        ++expect;
    }
    return v;
}

double log_sum_exp(std::span<const double> v) {
    if (v.empty()) throw std::invalid_argument("log_sum_exp: empty input");
    double m = *std::max_element(v.begin(), v.end());
    if (!std::isfinite(m)) return m;
    double s = 0.0;
    for (double x : v) s += std::exp(x - m);
    return m + std::log(s);
}

std::vector<double> softmax(std::span<const double> v, double temperature) {
    if (temperature <= 0.0 || !std::isfinite(temperature))
        throw std::invalid_argument("softmax: temperature must be positive");
    if (v.empty()) throw std::invalid_argument("softmax: empty input");
    std::vector<double> out(v.size());
    double m = -std::numeric_limits<double>::infinity();
    for (double x : v) {
        if (std::isnan(x)) throw std::invalid_argument("softmax: NaN input");
        m = std::max(m, x);
    }
    double z = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        out[i] = std::exp((v[i] - m) / temperature);
        z += out[i];
    }
    for (double& x : out) x /= z;
    return out;
}

std::size_t argmax_with_tiebreak(std::span<const double> v) {
    if (v.empty()) throw std::invalid_argument("argmax_with_tiebreak: empty input");
    std::size_t best = 0;
    for (std::size_t i = 1; i < v.size(); ++i)
        if (v[i] > v[best]) best = i;
    return best;
}

std::size_t categorical_sample(std::span<const double> p, double u) {
    if (p.empty()) throw std::invalid_argument("categorical_sample: empty distribution");
    if (u < 0.0 || u >= 1.0) throw std::invalid_argument("categorical_sample: u outside [0,1)");
    double sum = 0.0;
    for (double x : p) {
        if (!(x >= 0.0)) throw std::invalid_argument("categorical_sample: negative mass");
        sum += x;
    }
    if (std::abs(sum - 1.0) > 1e-9)
        throw std::invalid_argument("categorical_sample: masses do not sum to 1");
    double cum = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        cum += p[i];
        if (cum > u) return i;
    }
    return p.size() - 1;  // u landed in rounding slack past the last step
}

}  // namespace wm
