#include "apilot/advisories/cvss.hpp"

#include <charconv>
#include <cmath>
#include <map>
#include <string>

namespace apilot::advisories {

namespace {

std::optional<std::map<std::string, std::string>> metrics(std::string_view vector) {
    std::map<std::string, std::string> out;
    std::size_t start = 0;
    while (start <= vector.size()) {
        const auto end = std::min(vector.find('/', start), vector.size());
        const auto part = vector.substr(start, end - start);
        const auto colon = part.find(':');
        if (colon == std::string_view::npos || colon == 0 || colon + 1 == part.size()) return std::nullopt;
        if (!out.emplace(std::string(part.substr(0, colon)), std::string(part.substr(colon + 1))).second) {
            return std::nullopt;
        }
        start = end + 1;
    }
    return out;
}

std::optional<double> lookup(const std::map<std::string, std::string>& m, const char* key,
                             std::initializer_list<std::pair<const char*, double>> table) {
    auto it = m.find(key);
    if (it == m.end()) return std::nullopt;
    for (const auto& [k, v] : table) {
        if (it->second == k) return v;
    }
    return std::nullopt;
}

// Smallest number with one decimal that is >= x, robust to binary noise.
double roundup(double x) {
    const auto i = static_cast<long long>(std::llround(x * 100000.0));
    if (i % 10000 == 0) return static_cast<double>(i) / 100000.0;
    return (std::floor(static_cast<double>(i) / 10000.0) + 1.0) / 10.0;
}

}  // namespace

std::optional<double> cvss3_base_score(std::string_view vector) {
    if (vector.rfind("CVSS:3.0/", 0) != 0 && vector.rfind("CVSS:3.1/", 0) != 0) return std::nullopt;
    auto m = metrics(vector.substr(9));
    if (!m) return std::nullopt;
    const auto scope = m->find("S");
    if (scope == m->end() || (scope->second != "U" && scope->second != "C")) return std::nullopt;
    const bool changed = scope->second == "C";
    const auto av = lookup(*m, "AV", {{"N", 0.85}, {"A", 0.62}, {"L", 0.55}, {"P", 0.2}});
    const auto ac = lookup(*m, "AC", {{"L", 0.77}, {"H", 0.44}});
    const auto pr = changed ? lookup(*m, "PR", {{"N", 0.85}, {"L", 0.68}, {"H", 0.5}})
                            : lookup(*m, "PR", {{"N", 0.85}, {"L", 0.62}, {"H", 0.27}});
    const auto ui = lookup(*m, "UI", {{"N", 0.85}, {"R", 0.62}});
    const auto c = lookup(*m, "C", {{"H", 0.56}, {"L", 0.22}, {"N", 0.0}});
    const auto i = lookup(*m, "I", {{"H", 0.56}, {"L", 0.22}, {"N", 0.0}});
    const auto a = lookup(*m, "A", {{"H", 0.56}, {"L", 0.22}, {"N", 0.0}});
    if (!av || !ac || !pr || !ui || !c || !i || !a) return std::nullopt;

    const double iss = 1.0 - (1.0 - *c) * (1.0 - *i) * (1.0 - *a);
    const double impact =
        changed ? 7.52 * (iss - 0.029) - 3.25 * std::pow(iss - 0.02, 15) : 6.42 * iss;
    const double exploitability = 8.22 * *av * *ac * *pr * *ui;
    if (impact <= 0) return 0.0;
    const double raw = std::min(changed ? 1.08 * (impact + exploitability) : impact + exploitability, 10.0);
    // 3.0 rounds up plainly; 3.1 guards against floating-point residue.
    if (vector[7] == '0') return std::ceil(raw * 10.0) / 10.0;
    return roundup(raw);
}

std::optional<double> cvss2_base_score(std::string_view vector) {
    if (vector.size() >= 2 && vector.front() == '(' && vector.back() == ')') vector = vector.substr(1, vector.size() - 2);
    auto m = metrics(vector);
    if (!m) return std::nullopt;
    const auto av = lookup(*m, "AV", {{"L", 0.395}, {"A", 0.646}, {"N", 1.0}});
    const auto ac = lookup(*m, "AC", {{"H", 0.35}, {"M", 0.61}, {"L", 0.71}});
    const auto au = lookup(*m, "Au", {{"M", 0.45}, {"S", 0.56}, {"N", 0.704}});
    const auto c = lookup(*m, "C", {{"N", 0.0}, {"P", 0.275}, {"C", 0.660}});
    const auto i = lookup(*m, "I", {{"N", 0.0}, {"P", 0.275}, {"C", 0.660}});
    const auto a = lookup(*m, "A", {{"N", 0.0}, {"P", 0.275}, {"C", 0.660}});
    if (!av || !ac || !au || !c || !i || !a) return std::nullopt;
    const double impact = 10.41 * (1.0 - (1.0 - *c) * (1.0 - *i) * (1.0 - *a));
    const double exploitability = 20.0 * *av * *ac * *au;
    const double f = impact == 0.0 ? 0.0 : 1.176;
    const double raw = ((0.6 * impact) + (0.4 * exploitability) - 1.5) * f;
    return std::round(raw * 10.0) / 10.0;
}

std::optional<double> severity_score(std::string_view type, std::string_view score) {
    if (score.rfind("CVSS:3", 0) == 0) return cvss3_base_score(score);
    if (type == "CVSS_V2" || score.find("Au:") != std::string_view::npos) return cvss2_base_score(score);
    double value = 0;
    const auto* end = score.data() + score.size();
    auto [ptr, ec] = std::from_chars(score.data(), end, value);
    if (ec != std::errc() || ptr != end || !(value >= 0.0 && value <= 10.0)) return std::nullopt;
    return value;
}

}  // namespace apilot::advisories
