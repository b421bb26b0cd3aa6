#pragma once

// Weight file layout (all integers and floats little-endian):
//
//   offset  size  field
//   0       4     magic "SWGW"
//   4       2     u16 format version (1)
//   6       28    config: 7 x i32 vocab, hidden, heads, layers, max_seq,
//                 class_count, mlp_mult
//   34      4     u32 tensor count N
//   38      ...   directory, N entries: u16 name length, name bytes (ASCII),
//                 u32 rows, u32 cols
//   ...     ...   tensor data in directory order, rows*cols f32 each,
//                 row-major
//
// Tensor names and order are those of ParamSet::visit.

#include "swg/model.hpp"

#include <filesystem>
#include <string>

namespace swg::model {

inline constexpr char kWeightMagic[4] = {'S', 'W', 'G', 'W'};
inline constexpr uint16_t kWeightVersion = 1;

std::string encode_weights(const ModelWeights & w);
// Throws FormatError whose field() is "magic", "version", "config.<name>",
// "tensor_count", "directory" or the offending tensor name.
ModelWeights decode_weights(std::string_view bytes);

void save_weights(const ModelWeights & w, const std::filesystem::path & path);
ModelWeights load_weights(const std::filesystem::path & path);

} // namespace swg::model
