#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "starnet/tensor.hpp"

namespace starnet::data {

// Column indices of (frame, ped_id, x, y) in a whitespace-separated record.
struct ColumnMap {
  std::size_t frame = 0;
  std::size_t ped_id = 1;
  std::size_t x = 2;
  std::size_t y = 3;

  static ColumnMap parse(std::string_view spec);  // "0,1,2,3"
};

struct RawRecord {
  std::int64_t frame = 0;  // frame number as written in the file
  std::int64_t step = 0;   // (frame - first_frame) / stride
  std::int64_t ped_id = 0;
  double x = 0.0;
  double y = 0.0;
};

// Reads one trajectory file. Output is sorted by (frame, ped_id). The frame
// stride is the smallest gap between distinct frames; every gap must be a
// multiple of it (empty frames are tolerated, misaligned ones are not).
std::vector<RawRecord> parse_dataset(std::istream& in, const ColumnMap& columns = {});
std::vector<RawRecord> parse_dataset_file(const std::filesystem::path& path, const ColumnMap& columns = {});

// Writes records as "frame ped_id x y" lines; parse_dataset reads them back
// exactly.
void write_records(std::ostream& out, const std::vector<RawRecord>& records);

struct Window {
  Tensor positions;  // [N x steps x 2], steps = t_obs (+ t_pred when has_future)
  std::vector<std::int64_t> ped_ids;
  Tensor centroid = Tensor::zeros({2});
  std::size_t t_obs = 0;
  std::size_t t_pred = 0;
  bool has_future = true;
  std::string label;
  std::int64_t start_step = 0;
  std::int64_t start_frame = 0;

  std::size_t num_peds() const { return ped_ids.size(); }
  std::size_t steps() const { return positions.dim(1); }
  double x(std::size_t ped, std::size_t t) const { return positions[(ped * steps() + t) * 2]; }
  double y(std::size_t ped, std::size_t t) const { return positions[(ped * steps() + t) * 2 + 1]; }
  // Positions at one step for every pedestrian, [N x 2].
  Tensor at_step(std::size_t t) const;
  // Ground-truth future, [N x t_pred x 2].
  Tensor future() const;
};

enum class Presence {
  full,           // pedestrian present for all t_obs + t_pred steps (training / evaluation)
  observed_only,  // present for the t_obs observed steps (prediction)
};

// Slides a window of t_obs + t_pred steps over the recording, advancing the
// start by `stride` steps, and keeps every pedestrian seen at every step of
// the window. Windows without pedestrians are dropped.
std::vector<Window> build_windows(const std::vector<RawRecord>& records, std::size_t t_obs, std::size_t t_pred,
                                  std::size_t stride = 1, Presence presence = Presence::full,
                                  std::string_view label = {});

// Subtracts the mean position at the last observed step from every
// coordinate; the offset is added to `centroid`.
Window center_window(const Window& w);
// Rotates every coordinate about the origin by theta radians.
Window rotate_window(const Window& w, double theta);
Window translate_window(const Window& w, double dx, double dy);
// Reorders pedestrians: result row i is input row order[i].
Window permute_window(const Window& w, std::span<const std::size_t> order);

inline constexpr std::array<std::string_view, 5> kDatasetLabels = {"ETH", "HOTEL", "UNIV", "ZARA-1", "ZARA-2"};

struct SplitPlan {
  std::vector<std::string> train_sets;
  std::string test_set;
};

SplitPlan leave_one_out_split(std::span<const std::string_view> all_sets, std::string_view held_out);
SplitPlan leave_one_out_split(std::string_view held_out);

struct LoadOptions {
  std::size_t t_obs = 8;
  std::size_t t_pred = 12;
  std::size_t stride = 1;
  Presence presence = Presence::full;
  ColumnMap columns;
};

// Windows from every .txt file under root/label, files visited in sorted
// order. Throws FormatError if the directory does not exist.
std::vector<Window> load_set(const std::filesystem::path& root, std::string_view label, const LoadOptions& options);

}  // namespace starnet::data
