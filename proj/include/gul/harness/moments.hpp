#pragma once

#include <fstream>
#include <optional>
#include <string>

#include "gul/harness/curve.hpp"
#include "gul/matrix_io.hpp"
#include "gul/spectra.hpp"

namespace gul::harness {

struct MomentsOutput {
  EmpiricalMoments moments;
  std::optional<HomogeneityReport> homogeneity;
};

/// Reads a samples-by-features file (and optional class tags), then writes
/// <prefix>_mean.bin (p x 1), <prefix>_cov.bin (p x p) and, with at least two
/// classes, <prefix>_homogeneity.csv.
inline MomentsOutput run_moments(const std::string& data_path, const std::optional<std::string>& labels_path,
                                 const std::string& out_prefix) {
  const MatrixXd X = io::read_matrix(data_path).transpose();
  std::vector<std::string> tags;
  if (labels_path) {
    tags = io::read_labels(*labels_path);
    require(static_cast<Index>(tags.size()) == X.cols(), ErrorKind::DimensionMismatch,
            "label file has " + std::to_string(tags.size()) + " tags for " + std::to_string(X.cols()) + " samples");
  }
  MomentsOutput out;
  out.moments = empirical_moments(X, tags);
  io::write_binary(out_prefix + "_mean.bin", MatrixXd(out.moments.overall.mean));
  io::write_binary(out_prefix + "_cov.bin", out.moments.overall.cov);
  if (out.moments.per_class.size() >= 2) {
    out.homogeneity = homogeneity_report(out.moments.per_class);
    const std::string path = out_prefix + "_homogeneity.csv";
    std::ofstream f(path);
    require(static_cast<bool>(f), ErrorKind::Io, "cannot write '" + path + "'");
    f << "class_a,class_b,raw_distance,correlation_distance\n";
    for (const auto& pr : out.homogeneity->pairs) {
      f << pr.a << ',' << pr.b << ',' << format_double(pr.raw_distance) << ','
        << format_double(pr.correlation_distance) << '\n';
    }
    f << "max,,"
      << format_double(out.homogeneity->raw_score) << ',' << format_double(out.homogeneity->score) << '\n';
  }
  return out;
}

}  // namespace gul::harness
