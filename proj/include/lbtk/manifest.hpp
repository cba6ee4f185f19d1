#pragma once

#include "lbtk/image.hpp"

#include <nlohmann/json.hpp>

#include <map>
#include <string>
#include <vector>

namespace lbtk {

using Json = nlohmann::ordered_json;

inline constexpr int kSchemaVersion = 1;

/// One captured pair of a scene, with an optional ground-truth mask.
struct PairEntry {
    std::string id;
    std::string blur;
    std::string sharp;
    std::string mask;
};

/// Scene description binding the files of one capture session: an
/// optional whiteboard pair for color calibration, the static reference
/// pair for alignment and model initialization, and the target pairs.
struct SceneManifest {
    int width = 0;
    int height = 0;
    std::string domain = "rgb";  // "raw" (Bayer PNG + sidecar) or "rgb"
    std::string whiteboard_blur, whiteboard_sharp;
    std::string reference_blur, reference_sharp;
    std::vector<PairEntry> pairs;
    Json ground_truth;  // opaque simulator record, ignored by processing

    std::string base_dir;  // directory of the manifest file

    /// Joins a manifest-relative path with the manifest directory.
    std::string resolve(const std::string& relative) const;

    bool has_whiteboard() const { return !whiteboard_blur.empty(); }
    bool has_reference() const { return !reference_blur.empty(); }

    Json to_json() const;
    static SceneManifest from_json(const Json& j, const std::string& base_dir);

    void save(const std::string& path) const;
    static SceneManifest load(const std::string& path);
};

/// Flat key-value configuration: "key = value" lines, '#' comments,
/// dotted keys. Flag overrides use the same "key=value" syntax.
class Config {
public:
    Config() = default;

    static Config load(const std::string& path);
    void apply_override(const std::string& key_equals_value);

    bool has(const std::string& key) const { return values_.count(key) > 0; }
    std::string get_string(const std::string& key, const std::string& fallback) const;
    double get_double(const std::string& key, double fallback) const;
    int get_int(const std::string& key, int fallback) const;
    std::vector<double> get_doubles(const std::string& key,
                                    const std::vector<double>& fallback) const;

private:
    std::map<std::string, std::string> values_;
};

/// Common report envelope: schema version, tool, command, optional
/// timestamp (suppressed for byte-identical reruns).
Json make_report(const std::string& command, bool with_timestamp);

void write_json(const Json& j, const std::string& path);
Json read_json(const std::string& path);

}  // namespace lbtk
