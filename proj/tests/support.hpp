#pragma once

#include <atomic>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <unistd.h>

#include <nlohmann/json.hpp>

#include "truncgen/image.hpp"
#include "truncgen/latent.hpp"

namespace tgtest {

inline std::filesystem::path fixture(const std::string& rel) { return std::filesystem::path(TRUNCGEN_FIXTURES) / rel; }

inline nlohmann::json load(const std::string& rel) {
  std::ifstream in(fixture(rel));
  if (!in) throw std::runtime_error("missing fixture " + rel);
  return nlohmann::json::parse(in);
}

inline Eigen::VectorXd vec(const nlohmann::json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

inline truncgen::StyleCode code(const nlohmann::json& rows) {
  truncgen::StyleCode w(rows.size(), rows.at(0).size());
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < rows[r].size(); ++c) w(r, c) = rows[r][c].get<double>();
  return w;
}

inline truncgen::Image image(const nlohmann::json& shape, const nlohmann::json& pixels) {
  truncgen::Image img(truncgen::ImageShape{shape.at(0).get<int>(), shape.at(1).get<int>(), shape.at(2).get<int>()});
  const auto v = pixels.get<std::vector<double>>();
  if (static_cast<int>(v.size()) != img.shape.size()) throw std::runtime_error("fixture pixel count");
  for (std::size_t i = 0; i < v.size(); ++i) img.pixels[static_cast<Eigen::Index>(i)] = v[i];
  return img;
}

/// Removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("truncgen_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& rel) const { return path_ / rel; }

 private:
  std::filesystem::path path_;
};

}  // namespace tgtest
