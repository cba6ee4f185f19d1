#include "lbtk/manifest.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace lbtk {

namespace fs = std::filesystem;

std::string SceneManifest::resolve(const std::string& relative) const {
    if (relative.empty()) return relative;
    const fs::path p(relative);
    if (p.is_absolute() || base_dir.empty()) return relative;
    return (fs::path(base_dir) / p).string();
}

Json SceneManifest::to_json() const {
    Json j;
    j["schema_version"] = kSchemaVersion;
    j["kind"] = "scene_manifest";
    j["frame"] = {{"width", width}, {"height", height}};
    j["domain"] = domain;
    if (has_whiteboard())
        j["whiteboard"] = {{"blur", whiteboard_blur}, {"sharp", whiteboard_sharp}};
    if (has_reference())
        j["reference"] = {{"blur", reference_blur}, {"sharp", reference_sharp}};
    j["pairs"] = Json::array();
    for (const auto& p : pairs) {
        Json e = {{"id", p.id}, {"blur", p.blur}, {"sharp", p.sharp}};
        if (!p.mask.empty()) e["mask"] = p.mask;
        j["pairs"].push_back(e);
    }
    if (!ground_truth.is_null()) j["ground_truth"] = ground_truth;
    return j;
}

SceneManifest SceneManifest::from_json(const Json& j, const std::string& base_dir) {
    require(j.value("kind", "") == "scene_manifest", "not a scene manifest");
    SceneManifest m;
    m.base_dir = base_dir;
    if (j.contains("frame")) {
        m.width = j["frame"].value("width", 0);
        m.height = j["frame"].value("height", 0);
    }
    m.domain = j.value("domain", "rgb");
    require(m.domain == "rgb" || m.domain == "raw", "manifest domain must be rgb or raw");
    if (j.contains("whiteboard")) {
        m.whiteboard_blur = j["whiteboard"].value("blur", "");
        m.whiteboard_sharp = j["whiteboard"].value("sharp", "");
    }
    if (j.contains("reference")) {
        m.reference_blur = j["reference"].value("blur", "");
        m.reference_sharp = j["reference"].value("sharp", "");
    }
    for (const auto& e : j.value("pairs", Json::array())) {
        PairEntry p;
        p.id = e.value("id", "");
        p.blur = e.value("blur", "");
        p.sharp = e.value("sharp", "");
        p.mask = e.value("mask", "");
        require(!p.blur.empty() && !p.sharp.empty(), "pair entry needs blur and sharp paths");
        m.pairs.push_back(std::move(p));
    }
    if (j.contains("ground_truth")) m.ground_truth = j["ground_truth"];
    return m;
}

void SceneManifest::save(const std::string& path) const { write_json(to_json(), path); }

SceneManifest SceneManifest::load(const std::string& path) {
    const Json j = read_json(path);
    return from_json(j, fs::path(path).parent_path().string());
}

Config Config::load(const std::string& path) {
    std::ifstream f(path);
    require(f.good(), "cannot open config file: " + path);
    Config cfg;
    std::string line;
    int line_no = 0;
    while (std::getline(f, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const auto trim = [](std::string s) {
            const auto b = s.find_first_not_of(" \t\r");
            const auto e = s.find_last_not_of(" \t\r");
            return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
        };
        const std::string stripped = trim(line);
        if (stripped.empty()) continue;
        const auto eq = stripped.find('=');
        require(eq != std::string::npos,
                "config line " + std::to_string(line_no) + " is not 'key = value'");
        const std::string key = trim(stripped.substr(0, eq));
        const std::string value = trim(stripped.substr(eq + 1));
        require(!key.empty(), "config line " + std::to_string(line_no) + " has an empty key");
        cfg.values_[key] = value;
    }
    return cfg;
}

void Config::apply_override(const std::string& key_equals_value) {
    const auto eq = key_equals_value.find('=');
    if (eq == std::string::npos || eq == 0)
        throw Error(Error::Kind::usage, "override must be key=value: " + key_equals_value);
    values_[key_equals_value.substr(0, eq)] = key_equals_value.substr(eq + 1);
}

std::string Config::get_string(const std::string& key, const std::string& fallback) const {
    const auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
}

double Config::get_double(const std::string& key, double fallback) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    try {
        return std::stod(it->second);
    } catch (const std::exception&) {
        fail("config key '" + key + "' is not a number: " + it->second);
    }
}

int Config::get_int(const std::string& key, int fallback) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    try {
        return std::stoi(it->second);
    } catch (const std::exception&) {
        fail("config key '" + key + "' is not an integer: " + it->second);
    }
}

std::vector<double> Config::get_doubles(const std::string& key,
                                        const std::vector<double>& fallback) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    std::vector<double> out;
    std::string token;
    std::istringstream ss(it->second);
    while (std::getline(ss, token, ',')) {
        try {
            out.push_back(std::stod(token));
        } catch (const std::exception&) {
            fail("config key '" + key + "' has a non-numeric element: " + token);
        }
    }
    require(!out.empty(), "config key '" + key + "' is empty");
    return out;
}

Json make_report(const std::string& command, bool with_timestamp) {
    Json j;
    j["schema_version"] = kSchemaVersion;
    j["tool"] = "lbtk";
    j["command"] = command;
    if (with_timestamp) {
        const auto now = std::chrono::system_clock::now();
        j["timestamp_unix"] =
            std::chrono::duration_cast<std::chrono::seconds>(now.time_since_epoch()).count();
    }
    return j;
}

void write_json(const Json& j, const std::string& path) {
    std::ofstream f(path);
    require(f.good(), "cannot open report file for writing: " + path);
    f << j.dump(2) << "\n";
    require(f.good(), "write failed: " + path);
}

Json read_json(const std::string& path) {
    std::ifstream f(path);
    require(f.good(), "cannot open JSON file: " + path);
    try {
        return Json::parse(f);
    } catch (const Json::exception& e) {
        fail("malformed JSON in " + path + ": " + e.what());
    }
}

}  // namespace lbtk
