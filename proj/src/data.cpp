#include "starnet/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "starnet/error.hpp"

namespace starnet::data {
namespace {

bool parse_double(std::string_view token, double& out) {
  const char* first = token.data();
  const char* last = token.data() + token.size();
  if (first != last && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last && std::isfinite(out);
}

bool parse_integral(std::string_view token, std::int64_t& out) {
  double v = 0.0;
  if (!parse_double(token, v) || v != std::floor(v) || std::abs(v) > 9.0e15) return false;
  out = static_cast<std::int64_t>(v);
  return true;
}

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    std::size_t j = i;
    while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j]))) ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

// Sum in ascending order so the result does not depend on pedestrian order.
double order_free_mean(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  double s = 0.0;
  for (double v : values) s += v;
  return s / static_cast<double>(values.size());
}

}  // namespace

ColumnMap ColumnMap::parse(std::string_view spec) {
  std::vector<std::size_t> idx;
  std::size_t start = 0;
  while (start <= spec.size()) {
    const std::size_t comma = std::min(spec.find(',', start), spec.size());
    const std::string_view tok = spec.substr(start, comma - start);
    std::size_t v = 0;
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (tok.empty() || ec != std::errc() || ptr != tok.data() + tok.size()) {
      throw ParseError("column map must be four comma-separated indices, got '" + std::string(spec) + "'");
    }
    idx.push_back(v);
    start = comma + 1;
  }
  if (idx.size() != 4) {
    throw ParseError("column map must be four comma-separated indices, got '" + std::string(spec) + "'");
  }
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t j = i + 1; j < 4; ++j) {
      if (idx[i] == idx[j]) throw ParseError("column map uses column " + std::to_string(idx[i]) + " twice");
    }
  }
  return ColumnMap{idx[0], idx[1], idx[2], idx[3]};
}

std::vector<RawRecord> parse_dataset(std::istream& in, const ColumnMap& columns) {
  const std::size_t needed = std::max({columns.frame, columns.ped_id, columns.x, columns.y, std::size_t{3}}) + 1;
  std::vector<RawRecord> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto fields = split_ws(line);
    if (fields.empty()) continue;
    if (fields.size() < needed) {
      throw ParseError("expected at least " + std::to_string(needed) + " fields, found " +
                           std::to_string(fields.size()),
                       line_no);
    }
    RawRecord r;
    if (!parse_integral(fields[columns.frame], r.frame)) {
      throw ParseError("frame '" + std::string(fields[columns.frame]) + "' is not an integer", line_no);
    }
    if (!parse_integral(fields[columns.ped_id], r.ped_id)) {
      throw ParseError("pedestrian id '" + std::string(fields[columns.ped_id]) + "' is not an integer", line_no);
    }
    if (!parse_double(fields[columns.x], r.x) || !parse_double(fields[columns.y], r.y)) {
      throw ParseError("coordinates must be finite numbers", line_no);
    }
    records.push_back(r);
  }
  if (records.empty()) return records;

  std::stable_sort(records.begin(), records.end(), [](const RawRecord& a, const RawRecord& b) {
    return a.frame != b.frame ? a.frame < b.frame : a.ped_id < b.ped_id;
  });
  for (std::size_t i = 1; i < records.size(); ++i) {
    if (records[i].frame == records[i - 1].frame && records[i].ped_id == records[i - 1].ped_id) {
      throw FormatError("duplicate record for frame " + std::to_string(records[i].frame) + ", pedestrian " +
                        std::to_string(records[i].ped_id));
    }
  }

  std::vector<std::int64_t> frames;
  for (const auto& r : records) {
    if (frames.empty() || frames.back() != r.frame) frames.push_back(r.frame);
  }
  std::int64_t stride = 0;
  for (std::size_t i = 1; i < frames.size(); ++i) {
    const std::int64_t gap = frames[i] - frames[i - 1];
    stride = stride == 0 ? gap : std::min(stride, gap);
  }
  if (stride == 0) stride = 1;
  for (std::size_t i = 1; i < frames.size(); ++i) {
    const std::int64_t gap = frames[i] - frames[i - 1];
    if (gap % stride != 0) {
      throw FormatError("inconsistent frame stride: gap " + std::to_string(gap) + " between frames " +
                        std::to_string(frames[i - 1]) + " and " + std::to_string(frames[i]) +
                        " is not a multiple of " + std::to_string(stride));
    }
  }
  for (auto& r : records) r.step = (r.frame - frames.front()) / stride;
  return records;
}

std::vector<RawRecord> parse_dataset_file(const std::filesystem::path& path, const ColumnMap& columns) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open trajectory file " + path.string());
  try {
    return parse_dataset(in, columns);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

void write_records(std::ostream& out, const std::vector<RawRecord>& records) {
  char buf[64];
  for (const auto& r : records) {
    out << r.frame << ' ' << r.ped_id;
    for (double v : {r.x, r.y}) {
      auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
      out << ' ' << std::string_view(buf, static_cast<std::size_t>(ptr - buf));
    }
    out << '\n';
  }
}

Tensor Window::at_step(std::size_t t) const {
  const std::size_t n = num_peds();
  Tensor out = Tensor::zeros({n, 2});
  for (std::size_t i = 0; i < n; ++i) {
    out[i * 2] = x(i, t);
    out[i * 2 + 1] = y(i, t);
  }
  return out;
}

Tensor Window::future() const {
  if (!has_future) throw Error("window " + label + "@" + std::to_string(start_frame) + " has no ground-truth future");
  const std::size_t n = num_peds();
  Tensor out = Tensor::zeros({n, t_pred, 2});
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t t = 0; t < t_pred; ++t) {
      out[(i * t_pred + t) * 2] = x(i, t_obs + t);
      out[(i * t_pred + t) * 2 + 1] = y(i, t_obs + t);
    }
  }
  return out;
}

std::vector<Window> build_windows(const std::vector<RawRecord>& records, std::size_t t_obs, std::size_t t_pred,
                                  std::size_t stride, Presence presence, std::string_view label) {
  if (t_obs < 2) throw Error("t_obs must be at least 2");
  if (t_pred < 1) throw Error("t_pred must be at least 1");
  if (stride < 1) throw Error("window stride must be at least 1");
  std::vector<Window> windows;
  if (records.empty()) return windows;

  // ped -> step -> (x, y); ordered maps keep the output order stable.
  std::map<std::int64_t, std::map<std::int64_t, std::array<double, 2>>> tracks;
  std::map<std::int64_t, std::int64_t> frame_of_step;
  std::int64_t first = records.front().step, last = records.front().step;
  for (const auto& r : records) {
    tracks[r.ped_id][r.step] = {r.x, r.y};
    frame_of_step.emplace(r.step, r.frame);
    first = std::min(first, r.step);
    last = std::max(last, r.step);
  }

  const std::size_t total = t_obs + t_pred;
  const std::size_t needed = presence == Presence::full ? total : t_obs;
  const auto span = static_cast<std::int64_t>(needed);
  for (std::int64_t s = first; s + span - 1 <= last; s += static_cast<std::int64_t>(stride)) {
    std::vector<std::int64_t> ids;
    for (const auto& [id, track] : tracks) {
      bool present = true;
      for (std::size_t t = 0; t < needed && present; ++t) {
        present = track.count(s + static_cast<std::int64_t>(t)) > 0;
      }
      if (present) ids.push_back(id);
    }
    if (ids.empty()) continue;
    Window w;
    w.t_obs = t_obs;
    w.t_pred = t_pred;
    w.has_future = presence == Presence::full;
    w.label = std::string(label);
    w.start_step = s;
    const auto f = frame_of_step.find(s);
    w.start_frame = f != frame_of_step.end() ? f->second : s;
    w.ped_ids = ids;
    std::vector<double> pos(ids.size() * needed * 2);
    for (std::size_t i = 0; i < ids.size(); ++i) {
      const auto& track = tracks.at(ids[i]);
      for (std::size_t t = 0; t < needed; ++t) {
        const auto& p = track.at(s + static_cast<std::int64_t>(t));
        pos[(i * needed + t) * 2] = p[0];
        pos[(i * needed + t) * 2 + 1] = p[1];
      }
    }
    w.positions = Tensor({ids.size(), needed, 2}, std::move(pos));
    windows.push_back(std::move(w));
  }
  return windows;
}

Window center_window(const Window& w) {
  const std::size_t n = w.num_peds();
  if (n == 0) throw Error("center_window: window has no pedestrians");
  std::vector<double> xs(n), ys(n);
  for (std::size_t i = 0; i < n; ++i) {
    xs[i] = w.x(i, w.t_obs - 1);
    ys[i] = w.y(i, w.t_obs - 1);
  }
  const double cx = order_free_mean(std::move(xs));
  const double cy = order_free_mean(std::move(ys));
  Window out = w;
  for (std::size_t k = 0; k < out.positions.size(); k += 2) {
    out.positions[k] -= cx;
    out.positions[k + 1] -= cy;
  }
  out.centroid[0] += cx;
  out.centroid[1] += cy;
  return out;
}

Window rotate_window(const Window& w, double theta) {
  const double c = std::cos(theta), s = std::sin(theta);
  Window out = w;
  for (std::size_t k = 0; k < out.positions.size(); k += 2) {
    const double x = w.positions[k], y = w.positions[k + 1];
    out.positions[k] = c * x - s * y;
    out.positions[k + 1] = s * x + c * y;
  }
  return out;
}

Window translate_window(const Window& w, double dx, double dy) {
  Window out = w;
  for (std::size_t k = 0; k < out.positions.size(); k += 2) {
    out.positions[k] += dx;
    out.positions[k + 1] += dy;
  }
  return out;
}

Window permute_window(const Window& w, std::span<const std::size_t> order) {
  const std::size_t n = w.num_peds();
  if (order.size() != n) throw DimensionError("permute_window: order has wrong length");
  std::vector<bool> seen(n, false);
  for (std::size_t i : order) {
    if (i >= n || seen[i]) throw Error("permute_window: order is not a permutation");
    seen[i] = true;
  }
  Window out = w;
  const std::size_t row = w.steps() * 2;
  for (std::size_t i = 0; i < n; ++i) {
    out.ped_ids[i] = w.ped_ids[order[i]];
    for (std::size_t k = 0; k < row; ++k) out.positions[i * row + k] = w.positions[order[i] * row + k];
  }
  return out;
}

SplitPlan leave_one_out_split(std::span<const std::string_view> all_sets, std::string_view held_out) {
  if (std::find(all_sets.begin(), all_sets.end(), held_out) == all_sets.end()) {
    std::string known;
    for (auto s : all_sets) known += (known.empty() ? "" : ", ") + std::string(s);
    throw Error("unknown dataset label '" + std::string(held_out) + "' (expected one of " + known + ")");
  }
  SplitPlan plan;
  plan.test_set = std::string(held_out);
  for (auto s : all_sets) {
    if (s != held_out) plan.train_sets.emplace_back(s);
  }
  return plan;
}

SplitPlan leave_one_out_split(std::string_view held_out) {
  return leave_one_out_split(std::span<const std::string_view>(kDatasetLabels), held_out);
}

std::vector<Window> load_set(const std::filesystem::path& root, std::string_view label, const LoadOptions& options) {
  const auto dir = root / std::string(label);
  if (!std::filesystem::is_directory(dir)) throw FormatError("dataset directory not found: " + dir.string());
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".txt") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<Window> windows;
  for (const auto& f : files) {
    const auto records = parse_dataset_file(f, options.columns);
    auto ws = build_windows(records, options.t_obs, options.t_pred, options.stride, options.presence,
                            std::string(label) + "/" + f.filename().string());
    std::move(ws.begin(), ws.end(), std::back_inserter(windows));
  }
  return windows;
}

}  // namespace starnet::data
