#pragma once

#include <string>
#include <utility>
#include <vector>

#include "dsrdiff/config.hpp"
#include "dsrdiff/schedule.hpp"

namespace dsrdiff {

struct EpochStat {
  int epoch = 0;
  double loss = 0.0;
  double guidance_loss = 0.0;
  double lr = 0.0;
};

// Single-file container: JSON metadata (version, config, schedule, history,
// array directory) followed by raw little-endian float64 blobs. Arrays round
// trip byte-exactly.
struct CheckpointManifest {
  int version = 1;
  int stage = 1;
  int epoch = 0;
  RunConfig config;
  NoiseSchedule schedule;
  std::vector<std::pair<std::string, std::vector<double>>> arrays;
  std::vector<EpochStat> history;

  const std::vector<double>& find_array(const std::string& name) const;
  bool has_array(const std::string& name) const;
};

void save_checkpoint(const CheckpointManifest& manifest, const std::string& path);
CheckpointManifest load_checkpoint(const std::string& path);

}  // namespace dsrdiff
