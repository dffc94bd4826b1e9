#pragma once
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "geoshape/grid.hpp"

namespace geoshape {

struct LabeledDataset {
  std::vector<ScalarGrid> images;
  std::vector<int> labels;
  int n_classes = 0;

  void validate() const;
};

struct SplitIndices {
  std::vector<std::size_t> train, val, test;
};

// Per-class shuffle + contiguous cut: round(f_train*n) to train,
// round(f_val*n) to val, remainder to test.
SplitIndices stratified_split(const std::vector<int>& labels, double f_train, double f_val,
                              std::uint64_t seed);

// Directory layout: images/NNNNN.gsf, labels.csv (header index,class),
// manifest.json with generation metadata.
void save_dataset(const LabeledDataset& ds, const std::string& dir,
                  const std::map<std::string, std::string>& manifest_extra = {});
LabeledDataset load_dataset(const std::string& dir);

// JSON object with the three index arrays, so an evaluation can reuse the
// exact split a model was trained with.
void save_split(const SplitIndices& split, const std::string& path);
SplitIndices load_split(const std::string& path);

}  // namespace geoshape
