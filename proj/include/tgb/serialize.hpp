#pragma once

#include <optional>
#include <string>

#include "tgb/corpus.hpp"
#include "tgb/model.hpp"
#include "tgb/training.hpp"

namespace tgb {

inline constexpr int kDatasetSchemaVersion = 1;
inline constexpr int kCheckpointSchemaVersion = 1;

// Line-delimited tab-separated records; floats at 17 significant digits so
// round-trips are bit-exact.
void save_dataset(const Dataset& dataset, const std::string& path);
Dataset load_dataset(const std::string& path);

struct Checkpoint {
  std::string fingerprint;
  int epoch = 0;
  ModelParams params;
  bool has_adam = false;
  AdamState adam;
  std::uint64_t shuffle_counter = 0;
  std::uint64_t poison_counter = 0;
  std::uint64_t pgd_counter = 0;
};

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

// 17-significant-digit float formatting shared by every writer.
std::string format_double(double v);
double parse_double(const std::string& s, int line_no);

}  // namespace tgb
