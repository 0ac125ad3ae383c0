#include "twr/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace twr {

namespace {

using nlohmann::json;

void put_le(std::string& out, std::uint64_t bits, int bytes) {
  for (int i = 0; i < bytes; ++i) {
    out.push_back(static_cast<char>((bits >> (8 * i)) & 0xFF));
  }
}

std::uint64_t get_le(const char* p, int bytes) {
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i) {
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(p[i])) << (8 * i);
  }
  return v;
}

void append_matrix(std::string& blob, const Matrix& m, StoragePrecision precision) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      if (precision == StoragePrecision::F64) {
        put_le(blob, std::bit_cast<std::uint64_t>(m(r, c)), 8);
      } else {
        put_le(blob, std::bit_cast<std::uint32_t>(static_cast<float>(m(r, c))), 4);
      }
    }
  }
}

Matrix read_matrix(const std::string& blob, std::size_t offset, Eigen::Index rows,
                   Eigen::Index cols, int width) {
  Matrix m(rows, cols);
  const char* p = blob.data() + offset;
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) {
      if (width == 8) {
        m(r, c) = std::bit_cast<double>(get_le(p, 8));
      } else {
        m(r, c) = std::bit_cast<float>(static_cast<std::uint32_t>(get_le(p, 4)));
      }
      p += width;
    }
  }
  return m;
}

}  // namespace

std::filesystem::path manifest_path(const std::filesystem::path& stem) {
  return std::filesystem::path(stem.string() + ".manifest");
}

std::filesystem::path blob_path(const std::filesystem::path& stem) {
  return std::filesystem::path(stem.string() + ".bin");
}

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& stem,
                     StoragePrecision precision) {
  const int width = precision == StoragePrecision::F64 ? 8 : 4;
  const char* dtype = precision == StoragePrecision::F64 ? "f64" : "f32";

  std::string blob;
  json tensors = json::array();
  auto add = [&](const std::string& name, const Matrix& m) {
    const std::size_t offset = blob.size();
    append_matrix(blob, m, precision);
    tensors.push_back({{"name", name},
                       {"rows", m.rows()},
                       {"cols", m.cols()},
                       {"dtype", dtype},
                       {"offset", offset},
                       {"bytes", static_cast<std::size_t>(m.size()) * width}});
  };
  const ParameterSet& params = checkpoint.params;
  for (std::size_t i = 0; i < params.size(); ++i) add(params.name(i), params[i]);
  const bool has_moments = checkpoint.adam.first_moment.size() == params.size();
  if (has_moments) {
    for (std::size_t i = 0; i < params.size(); ++i) {
      add("adam.m/" + params.name(i), checkpoint.adam.first_moment[i]);
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
      add("adam.v/" + params.name(i), checkpoint.adam.second_moment[i]);
    }
  }

  json manifest = {
      {"format", kCheckpointFormat},
      {"version", kCheckpointVersion},
      {"config", checkpoint.config},
      {"vocab_hash", checkpoint.vocab_hash},
      {"parameter_count", params.size()},
      {"optimizer", {{"step", checkpoint.adam.step}, {"has_moments", has_moments}}},
      {"rng", {{"seed", checkpoint.rng.seed}, {"counter", checkpoint.rng.counter}}},
      {"trainer", checkpoint.trainer},
      {"blob_bytes", blob.size()},
      {"tensors", tensors},
  };

  const auto parent = std::filesystem::path(stem).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
  {
    std::ofstream out(blob_path(stem), std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + blob_path(stem).string());
    out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
  }
  std::ofstream out(manifest_path(stem));
  if (!out) throw std::runtime_error("cannot write " + manifest_path(stem).string());
  out << manifest.dump(2) << '\n';
}

Checkpoint load_checkpoint(const std::filesystem::path& stem) {
  json manifest;
  {
    std::ifstream in(manifest_path(stem));
    if (!in) throw std::runtime_error("cannot read " + manifest_path(stem).string());
    try {
      in >> manifest;
    } catch (const json::exception& e) {
      throw std::runtime_error("malformed manifest " + manifest_path(stem).string() +
                               ": " + e.what());
    }
  }
  if (manifest.value("format", std::string()) != kCheckpointFormat) {
    throw std::runtime_error("not a checkpoint manifest: " + manifest_path(stem).string());
  }
  const int version = manifest.value("version", -1);
  if (version != kCheckpointVersion) {
    throw std::runtime_error("checkpoint version " + std::to_string(version) +
                             " is not supported (expected " +
                             std::to_string(kCheckpointVersion) + ")");
  }

  std::string blob;
  {
    std::ifstream in(blob_path(stem), std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + blob_path(stem).string());
    blob.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  }
  const std::size_t expected = manifest.at("blob_bytes").get<std::size_t>();
  if (blob.size() != expected) {
    throw std::runtime_error("checkpoint blob " + blob_path(stem).string() + " has " +
                             std::to_string(blob.size()) + " bytes, manifest expects " +
                             std::to_string(expected));
  }

  Checkpoint cp;
  cp.config = manifest.at("config");
  cp.vocab_hash = manifest.at("vocab_hash").get<std::uint64_t>();
  cp.trainer = manifest.value("trainer", json::object());
  cp.rng.seed = manifest.at("rng").at("seed").get<std::uint64_t>();
  cp.rng.counter = manifest.at("rng").at("counter").get<std::uint64_t>();
  cp.adam.step = manifest.at("optimizer").at("step").get<long>();

  const std::size_t n_params = manifest.at("parameter_count").get<std::size_t>();
  std::size_t cursor = 0;
  std::size_t index = 0;
  for (const auto& t : manifest.at("tensors")) {
    const auto rows = t.at("rows").get<Eigen::Index>();
    const auto cols = t.at("cols").get<Eigen::Index>();
    const auto offset = t.at("offset").get<std::size_t>();
    const auto bytes = t.at("bytes").get<std::size_t>();
    const std::string dtype = t.at("dtype").get<std::string>();
    const int width = dtype == "f64" ? 8 : dtype == "f32" ? 4 : 0;
    const std::string name = t.at("name").get<std::string>();
    if (width == 0) throw std::runtime_error("tensor " + name + ": unknown dtype " + dtype);
    if (offset != cursor || bytes != static_cast<std::size_t>(rows * cols) * width) {
      throw std::runtime_error("tensor " + name + ": offsets do not tile the blob");
    }
    cursor += bytes;
    Matrix m = read_matrix(blob, offset, rows, cols, width);
    if (index < n_params) {
      cp.params.add(name, std::move(m));
    } else if (index < 2 * n_params) {
      cp.adam.first_moment.push_back(std::move(m));
    } else {
      cp.adam.second_moment.push_back(std::move(m));
    }
    ++index;
  }
  if (cursor != blob.size()) {
    throw std::runtime_error("checkpoint tensors cover " + std::to_string(cursor) +
                             " bytes of a " + std::to_string(blob.size()) + "-byte blob");
  }
  return cp;
}

}  // namespace twr
