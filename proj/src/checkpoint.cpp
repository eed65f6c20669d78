#include "shellflow/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "shellflow/errors.hpp"

namespace shellflow {

static_assert(std::endian::native == std::endian::little, "checkpoint format assumes little-endian");

namespace {

constexpr char kMagic[8] = {'S', 'H', 'F', 'L', 'W', 'F', 'C', '1'};

void write_u64(std::ostream& os, std::uint64_t v) { os.write(reinterpret_cast<const char*>(&v), 8); }

std::uint64_t read_u64(std::istream& is, const std::string& path) {
  std::uint64_t v = 0;
  if (!is.read(reinterpret_cast<char*>(&v), 8)) throw Error(ErrorKind::Io, "truncated container " + path);
  return v;
}

}  // namespace

void FieldContainer::put(const std::string& name, std::vector<double> values) {
  texts_.erase(name);
  numbers_[name] = std::move(values);
}

void FieldContainer::put_text(const std::string& name, std::string text) {
  numbers_.erase(name);
  texts_[name] = std::move(text);
}

bool FieldContainer::has(const std::string& name) const {
  return numbers_.count(name) || texts_.count(name);
}

const std::vector<double>& FieldContainer::get(const std::string& name) const {
  const auto it = numbers_.find(name);
  if (it == numbers_.end()) throw Error(ErrorKind::Io, "container has no numeric entry '" + name + "'");
  return it->second;
}

double FieldContainer::scalar(const std::string& name) const {
  const auto& v = get(name);
  if (v.size() != 1) throw Error(ErrorKind::Io, "container entry '" + name + "' is not a scalar");
  return v[0];
}

const std::string& FieldContainer::text(const std::string& name) const {
  const auto it = texts_.find(name);
  if (it == texts_.end()) throw Error(ErrorKind::Io, "container has no text entry '" + name + "'");
  return it->second;
}

void FieldContainer::save(const std::filesystem::path& path) const {
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw Error(ErrorKind::Io, "cannot write " + tmp.string());
    os.write(kMagic, 8);
    write_u64(os, numbers_.size() + texts_.size());
    // Merge both maps in name order.
    auto n = numbers_.begin();
    auto t = texts_.begin();
    while (n != numbers_.end() || t != texts_.end()) {
      const bool num = t == texts_.end() || (n != numbers_.end() && n->first < t->first);
      const std::string& name = num ? n->first : t->first;
      os.put(num ? 0 : 1);
      write_u64(os, name.size());
      os.write(name.data(), static_cast<std::streamsize>(name.size()));
      if (num) {
        write_u64(os, n->second.size());
        os.write(reinterpret_cast<const char*>(n->second.data()),
                 static_cast<std::streamsize>(n->second.size() * sizeof(double)));
        ++n;
      } else {
        write_u64(os, t->second.size());
        os.write(t->second.data(), static_cast<std::streamsize>(t->second.size()));
        ++t;
      }
    }
    if (!os) throw Error(ErrorKind::Io, "write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw Error(ErrorKind::Io, "cannot rename " + tmp.string() + ": " + ec.message());
}

FieldContainer FieldContainer::load(const std::filesystem::path& path) {
  const std::string p = path.string();
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(ErrorKind::Io, "cannot open container " + p);
  char magic[8];
  if (!is.read(magic, 8) || std::memcmp(magic, kMagic, 8) != 0)
    throw Error(ErrorKind::Io, "not a field container: " + p);
  FieldContainer c;
  const std::uint64_t count = read_u64(is, p);
  for (std::uint64_t e = 0; e < count; ++e) {
    const int kind = is.get();
    if (kind != 0 && kind != 1) throw Error(ErrorKind::Io, "corrupt entry kind in " + p);
    const std::uint64_t len = read_u64(is, p);
    if (len > (1u << 20)) throw Error(ErrorKind::Io, "corrupt entry name in " + p);
    std::string name(len, '\0');
    if (!is.read(name.data(), static_cast<std::streamsize>(len))) throw Error(ErrorKind::Io, "truncated container " + p);
    const std::uint64_t n = read_u64(is, p);
    if (n > (1ull << 32)) throw Error(ErrorKind::Io, "corrupt entry size in " + p);
    if (kind == 0) {
      std::vector<double> v(n);
      if (!is.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(double))))
        throw Error(ErrorKind::Io, "truncated container " + p);
      c.numbers_[name] = std::move(v);
    } else {
      std::string s(n, '\0');
      if (!is.read(s.data(), static_cast<std::streamsize>(n))) throw Error(ErrorKind::Io, "truncated container " + p);
      c.texts_[name] = std::move(s);
    }
  }
  return c;
}

}  // namespace shellflow
