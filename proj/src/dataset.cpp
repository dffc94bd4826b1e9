#include "geoshape/dataset.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <iomanip>
#include <sstream>

#include "geoshape/image_io.hpp"
#include "geoshape/rng.hpp"

namespace geoshape {

namespace fs = std::filesystem;

void LabeledDataset::validate() const {
  if (images.size() != labels.size())
    throw ContractViolation("dataset: image/label count mismatch");
  for (int l : labels)
    if (l < 0 || l >= n_classes) throw ContractViolation("dataset: label out of range");
}

SplitIndices stratified_split(const std::vector<int>& labels, double f_train, double f_val,
                              std::uint64_t seed) {
  if (f_train < 0.0 || f_val < 0.0 || f_train + f_val > 1.0 + 1e-12)
    throw ContractViolation("stratified_split: bad fractions");
  int n_classes = 0;
  for (int l : labels) n_classes = std::max(n_classes, l + 1);
  SplitIndices out;
  for (int c = 0; c < n_classes; ++c) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < labels.size(); ++i)
      if (labels[i] == c) idx.push_back(i);
    std::mt19937_64 eng = make_engine(seed, rng_stream::kSplit, static_cast<std::uint64_t>(c));
    std::shuffle(idx.begin(), idx.end(), eng);
    std::size_t n = idx.size();
    std::size_t n_train = static_cast<std::size_t>(std::llround(f_train * n));
    std::size_t n_val = static_cast<std::size_t>(std::llround(f_val * n));
    n_train = std::min(n_train, n);
    n_val = std::min(n_val, n - n_train);
    for (std::size_t i = 0; i < n; ++i) {
      if (i < n_train)
        out.train.push_back(idx[i]);
      else if (i < n_train + n_val)
        out.val.push_back(idx[i]);
      else
        out.test.push_back(idx[i]);
    }
  }
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.val.begin(), out.val.end());
  std::sort(out.test.begin(), out.test.end());
  return out;
}

void save_dataset(const LabeledDataset& ds, const std::string& dir,
                  const std::map<std::string, std::string>& manifest_extra) {
  ds.validate();
  fs::create_directories(fs::path(dir) / "images");
  for (std::size_t i = 0; i < ds.images.size(); ++i) {
    std::ostringstream name;
    name << std::setw(5) << std::setfill('0') << i << ".gsf";
    write_scalar_gsf(ds.images[i], (fs::path(dir) / "images" / name.str()).string());
  }
  std::string csv = "index,class\n";
  for (std::size_t i = 0; i < ds.labels.size(); ++i)
    csv += std::to_string(i) + "," + std::to_string(ds.labels[i]) + "\n";
  write_text_file((fs::path(dir) / "labels.csv").string(), csv);

  nlohmann::json manifest;
  manifest["count"] = ds.images.size();
  manifest["n_classes"] = ds.n_classes;
  if (!ds.images.empty()) {
    manifest["width"] = ds.images[0].width;
    manifest["height"] = ds.images[0].height;
  }
  for (const auto& [k, v] : manifest_extra) manifest[k] = v;
  write_text_file((fs::path(dir) / "manifest.json").string(), manifest.dump(2) + "\n");
}

void save_split(const SplitIndices& split, const std::string& path) {
  nlohmann::json j;
  j["train"] = split.train;
  j["val"] = split.val;
  j["test"] = split.test;
  write_text_file(path, j.dump(2) + "\n");
}

SplitIndices load_split(const std::string& path) {
  std::string text = read_text_file(path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(path, e.byte, "invalid split description");
  }
  SplitIndices split;
  try {
    split.train = j.at("train").get<std::vector<std::size_t>>();
    split.val = j.at("val").get<std::vector<std::size_t>>();
    split.test = j.at("test").get<std::vector<std::size_t>>();
  } catch (const nlohmann::json::exception&) {
    throw FormatError(path, 0, "split description missing required fields");
  }
  return split;
}

LabeledDataset load_dataset(const std::string& dir) {
  LabeledDataset ds;
  std::string csv_path = (fs::path(dir) / "labels.csv").string();
  std::string csv = read_text_file(csv_path);
  std::istringstream in(csv);
  std::string line;
  bool first = true;
  std::vector<std::pair<std::size_t, int>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (first) {
      first = false;
      if (line != "index,class") throw FormatError(csv_path, 0, "unexpected labels.csv header");
      continue;
    }
    std::size_t comma = line.find(',');
    if (comma == std::string::npos) throw FormatError(csv_path, 0, "malformed labels.csv row");
    rows.emplace_back(std::stoul(line.substr(0, comma)), std::stoi(line.substr(comma + 1)));
  }
  std::sort(rows.begin(), rows.end());
  for (const auto& [idx, label] : rows) {
    std::ostringstream name;
    name << std::setw(5) << std::setfill('0') << idx << ".gsf";
    ds.images.push_back(read_scalar_gsf((fs::path(dir) / "images" / name.str()).string()));
    ds.labels.push_back(label);
    ds.n_classes = std::max(ds.n_classes, label + 1);
  }
  ds.validate();
  return ds;
}

}  // namespace geoshape
