#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace dgstab {

/// Pearson correlation; nullopt with fewer than 3 points or zero variance.
std::optional<double> pearson(const std::vector<double>& x, const std::vector<double>& y);
/// Ranks starting at 1, ties share their average rank.
std::vector<double> average_ranks(const std::vector<double>& v);
/// Pearson correlation of average ranks.
std::optional<double> spearman(const std::vector<double>& x, const std::vector<double>& y);

struct ScatterPlot {
    std::string title;
    std::string x_label;
    std::string y_label;
    std::vector<double> x;
    std::vector<double> y;
};

/// Writes `<stem>.svg`, the sidecar `<stem>.csv` holding exactly the plotted
/// numbers, and a gnuplot-ready `<stem>.dat`. Returns the three paths.
std::vector<std::filesystem::path> write_scatter(const ScatterPlot& plot, const std::filesystem::path& dir,
                                                 const std::string& stem);

std::string sha256_hex(const std::string& bytes);
std::string sha256_file(const std::filesystem::path& path);

/// `manifest.json` listing artifacts (relative paths and digests) plus the
/// configuration and its hash.
class Manifest {
  public:
    Manifest(std::string command, nlohmann::json config);

    void add(const std::filesystem::path& artifact);
    void write(const std::filesystem::path& dir) const;
    const nlohmann::json& config() const noexcept { return config_; }

  private:
    std::string command_;
    nlohmann::json config_;
    std::vector<std::filesystem::path> artifacts_;
};

}  // namespace dgstab
