// SPDX-License-Identifier: Apache-2.0
#include "milpfix/optim.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>

namespace milpfix::ad {

double adam_step(ParameterStore& store, double lr, const AdamOptions& options) {
  const double norm = store.grad_norm();
  const double clip = (options.clip_norm > 0.0 && norm > options.clip_norm) ? options.clip_norm / norm : 1.0;
  ++store.step;
  const double t = static_cast<double>(store.step);
  const double c1 = 1.0 - std::pow(options.beta1, t);
  const double c2 = 1.0 - std::pow(options.beta2, t);
  for (auto& e : store) {
    const Matrix g = e.grad * clip;
    e.first_moment = options.beta1 * e.first_moment + (1.0 - options.beta1) * g;
    e.second_moment = options.beta2 * e.second_moment + (1.0 - options.beta2) * g.cwiseAbs2();
    const Matrix m_hat = e.first_moment / c1;
    const Matrix v_hat = e.second_moment / c2;
    e.value -= lr * options.weight_decay * e.value;
    e.value.array() -= lr * m_hat.array() / (v_hat.array().sqrt() + options.epsilon);
  }
  return norm;
}

double LearningRateSchedule::value(std::int64_t step, std::int64_t total_steps) const {
  if (step < warmup_steps) {
    return initial + (peak - initial) * static_cast<double>(step) / static_cast<double>(warmup_steps);
  }
  const std::int64_t span = total_steps - 1 - warmup_steps;
  const double p = span <= 0 ? 1.0 : std::min(1.0, static_cast<double>(step - warmup_steps) / static_cast<double>(span));
  const double floor = 1.0 - decay_rate;
  const double envelope = 0.5 * (1.0 + std::cos(std::numbers::pi * p));
  return peak * ((1.0 - floor) * envelope + floor);
}

namespace {

constexpr char kMagic[8] = {'M', 'I', 'L', 'P', 'F', 'I', 'X', 'C'};
constexpr std::uint32_t kVersion = 1;

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

template <typename T>
T to_little(T v) {
  if constexpr (std::endian::native == std::endian::big) {
    unsigned char bytes[sizeof(T)];
    std::memcpy(bytes, &v, sizeof(T));
    std::reverse(bytes, bytes + sizeof(T));
    std::memcpy(&v, bytes, sizeof(T));
  }
  return v;
}

template <typename T>
void put(std::ostream& out, T v) {
  v = to_little(v);
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) fail(ErrorCode::IoFailure, "truncated checkpoint");
  return to_little(v);
}

void put_matrix(std::ostream& out, const Matrix& m) {
  for (Index k = 0; k < m.size(); ++k) put(out, m(k));
}

Matrix get_matrix(std::istream& in, Index rows, Index cols) {
  Matrix m(rows, cols);
  for (Index k = 0; k < m.size(); ++k) m(k) = get<double>(in);
  return m;
}

void put_string(std::ostream& out, const std::string& s) {
  put<std::uint64_t>(out, s.size());
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_string(std::istream& in) {
  const auto n = get<std::uint64_t>(in);
  if (n > (std::uint64_t{1} << 32)) fail(ErrorCode::IoFailure, "corrupt checkpoint string length");
  std::string s(n, '\0');
  in.read(s.data(), static_cast<std::streamsize>(n));
  if (!in) fail(ErrorCode::IoFailure, "truncated checkpoint");
  return s;
}

}  // namespace

void save_checkpoint(const ParameterStore& store, const nlohmann::json& meta, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::IoFailure, "cannot write checkpoint " + path.string());
  out.write(kMagic, sizeof(kMagic));
  put(out, kVersion);
  put_string(out, meta.dump());
  put<std::int64_t>(out, store.step);
  put<std::uint64_t>(out, static_cast<std::uint64_t>(store.size()));
  for (const auto& e : store) {
    put_string(out, e.name);
    put<std::uint64_t>(out, static_cast<std::uint64_t>(e.value.rows()));
    put<std::uint64_t>(out, static_cast<std::uint64_t>(e.value.cols()));
    put_matrix(out, e.value);
    put_matrix(out, e.first_moment);
    put_matrix(out, e.second_moment);
  }
  if (!out) fail(ErrorCode::IoFailure, "failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::IoFailure, "cannot open checkpoint " + path.string());
  char magic[sizeof(kMagic)];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) fail(ErrorCode::IoFailure, "not a checkpoint: " + path.string());
  const auto version = get<std::uint32_t>(in);
  if (version != kVersion) fail(ErrorCode::IoFailure, "unsupported checkpoint version " + std::to_string(version));
  Checkpoint ck;
  try {
    ck.meta = nlohmann::json::parse(get_string(in));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::IoFailure, std::string("corrupt checkpoint metadata: ") + e.what());
  }
  ck.store.step = get<std::int64_t>(in);
  const auto count = get<std::uint64_t>(in);
  for (std::uint64_t k = 0; k < count; ++k) {
    const std::string name = get_string(in);
    const auto rows = static_cast<Index>(get<std::uint64_t>(in));
    const auto cols = static_cast<Index>(get<std::uint64_t>(in));
    const Index idx = ck.store.add(name, get_matrix(in, rows, cols));
    ck.store[idx].first_moment = get_matrix(in, rows, cols);
    ck.store[idx].second_moment = get_matrix(in, rows, cols);
  }
  return ck;
}

}  // namespace milpfix::ad
