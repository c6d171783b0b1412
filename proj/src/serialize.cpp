#include "tgb/serialize.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <map>
#include <vector>

#include "tgb/errors.hpp"

namespace tgb {

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double parse_double(const std::string& s, int line_no) {
  double v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size())
    throw IoError("line " + std::to_string(line_no) + ": bad float '" + s + "'");
  return v;
}

namespace {

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  size_t start = 0;
  for (;;) {
    size_t tab = line.find('\t', start);
    if (tab == std::string::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
}

long parse_long(const std::string& s, int line_no) {
  long v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size())
    throw IoError("line " + std::to_string(line_no) + ": bad integer '" + s +
                  "'");
  return v;
}

std::uint64_t parse_u64(const std::string& s, int line_no) {
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size())
    throw IoError("line " + std::to_string(line_no) + ": bad integer '" + s +
                  "'");
  return v;
}

void require_fields(const std::vector<std::string>& fields, size_t n,
                    int line_no, const char* what) {
  if (fields.size() != n)
    throw IoError("line " + std::to_string(line_no) + ": " + what +
                  " record has " + std::to_string(fields.size()) +
                  " fields, expected " + std::to_string(n));
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);
  return out;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open for reading: " + path);
  return in;
}

void write_sample(std::ofstream& out, const Sample& s, const char* split) {
  out << "sample\t" << split << '\t' << provenance_name(s.provenance) << '\t'
      << s.target << '\t' << s.tokens.size();
  for (int t : s.tokens) out << '\t' << t;
  out << '\t' << s.reference.size();
  for (Eigen::Index i = 0; i < s.reference.size(); ++i)
    out << '\t' << format_double(s.reference(i));
  out << '\n';
}

Sample read_sample(const std::vector<std::string>& f, int line_no,
                   std::string* split) {
  if (f.size() < 6)
    throw IoError("line " + std::to_string(line_no) + ": truncated sample");
  Sample s;
  *split = f[1];
  s.provenance = provenance_from_name(f[2]);
  s.target = static_cast<int>(parse_long(f[3], line_no));
  const size_t n_tokens = static_cast<size_t>(parse_long(f[4], line_no));
  size_t off = 5;
  if (f.size() < off + n_tokens + 1)
    throw IoError("line " + std::to_string(line_no) + ": truncated sample");
  s.tokens.reserve(n_tokens);
  for (size_t i = 0; i < n_tokens; ++i)
    s.tokens.push_back(static_cast<int>(parse_long(f[off + i], line_no)));
  off += n_tokens;
  const size_t dim = static_cast<size_t>(parse_long(f[off++], line_no));
  require_fields(f, off + dim, line_no, "sample");
  s.reference.resize(dim);
  for (size_t i = 0; i < dim; ++i)
    s.reference(i) = parse_double(f[off + i], line_no);
  return s;
}

}  // namespace

void save_dataset(const Dataset& dataset, const std::string& path) {
  std::ofstream out = open_out(path);
  const int d = dataset.image_dim();
  out << "tgbdata\t" << kDatasetSchemaVersion << '\t' << d << '\t'
      << dataset.gallery_size() << '\t' << dataset.vocab.size() << '\n';

  const Vocabulary& v = dataset.vocab;
  for (int i = 0; i < v.size(); ++i) {
    const char* kind = "template";
    if (v.is_color(i)) kind = "color";
    else if (v.is_attribute(i)) kind = "shape";
    else if (std::find(v.filler_ids.begin(), v.filler_ids.end(), i) !=
             v.filler_ids.end())
      kind = "filler";
    out << "vocab\t" << i << '\t' << v.tokens[i] << '\t' << kind << '\n';
  }

  for (const GalleryImage& g : dataset.gallery) {
    out << "gallery\t" << g.id << '\t' << g.color << '\t' << g.shape;
    for (Eigen::Index i = 0; i < g.pixels.size(); ++i)
      out << '\t' << format_double(g.pixels(i));
    out << '\n';
  }

  for (const Sample& s : dataset.train) write_sample(out, s, "train");
  for (const Sample& s : dataset.validation) write_sample(out, s, "val");
  if (!out) throw IoError("write failure: " + path);
}

Dataset load_dataset(const std::string& path) {
  std::ifstream in = open_in(path);
  Dataset ds;
  std::string line;
  int line_no = 0;
  int dim = -1, g_count = -1, v_count = -1;

  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> f = split_tabs(line);
    if (line_no == 1) {
      require_fields(f, 5, line_no, "header");
      if (f[0] != "tgbdata")
        throw IoError("line 1: not a tgb dataset file");
      if (parse_long(f[1], 1) != kDatasetSchemaVersion)
        throw IoError("line 1: dataset schema version " + f[1] +
                      " unsupported (expected " +
                      std::to_string(kDatasetSchemaVersion) + ")");
      dim = static_cast<int>(parse_long(f[2], 1));
      g_count = static_cast<int>(parse_long(f[3], 1));
      v_count = static_cast<int>(parse_long(f[4], 1));
      continue;
    }
    if (f[0] == "vocab") {
      require_fields(f, 4, line_no, "vocab");
      const int id = static_cast<int>(parse_long(f[1], line_no));
      if (id != static_cast<int>(ds.vocab.tokens.size()))
        throw IoError("line " + std::to_string(line_no) +
                      ": vocab ids must be dense and in order");
      ds.vocab.tokens.push_back(f[2]);
      if (f[3] == "color") ds.vocab.color_ids.push_back(id);
      else if (f[3] == "shape") ds.vocab.shape_ids.push_back(id);
      else if (f[3] == "filler") ds.vocab.filler_ids.push_back(id);
      else if (f[3] == "template") {
        if (ds.vocab.make_id < 0) ds.vocab.make_id = id;
        else if (ds.vocab.it_id < 0) ds.vocab.it_id = id;
      } else {
        throw IoError("line " + std::to_string(line_no) +
                      ": unknown vocab kind '" + f[3] + "'");
      }
    } else if (f[0] == "gallery") {
      require_fields(f, static_cast<size_t>(4 + dim), line_no, "gallery");
      GalleryImage img;
      img.id = static_cast<int>(parse_long(f[1], line_no));
      img.color = static_cast<int>(parse_long(f[2], line_no));
      img.shape = static_cast<int>(parse_long(f[3], line_no));
      img.pixels.resize(dim);
      for (int i = 0; i < dim; ++i)
        img.pixels(i) = parse_double(f[4 + i], line_no);
      ds.gallery.push_back(std::move(img));
    } else if (f[0] == "sample") {
      std::string split;
      Sample s = read_sample(f, line_no, &split);
      if (split == "train") ds.train.push_back(std::move(s));
      else if (split == "val") ds.validation.push_back(std::move(s));
      else
        throw IoError("line " + std::to_string(line_no) + ": unknown split '" +
                      split + "'");
    } else {
      throw IoError("line " + std::to_string(line_no) +
                    ": unknown record type '" + f[0] + "'");
    }
  }
  if (dim < 0) throw IoError(path + ": missing header line");
  if (ds.vocab.size() != v_count)
    throw IoError(path + ": header declares " + std::to_string(v_count) +
                  " vocab entries, found " + std::to_string(ds.vocab.size()) +
                  " (last good line " + std::to_string(line_no) + ")");
  if (ds.gallery_size() != g_count)
    throw IoError(path + ": header declares " + std::to_string(g_count) +
                  " gallery images, found " +
                  std::to_string(ds.gallery_size()) + " (last good line " +
                  std::to_string(line_no) + ")");
  ds.trigger_stats = recount_stats(ds);
  return ds;
}

namespace {

void write_tensor(std::ofstream& out, const char* name, const Matrix& m) {
  out << "tensor\t" << name << '\t' << m.rows() << '\t' << m.cols();
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c)
      out << '\t' << format_double(m(r, c));
  out << '\n';
}

void write_tensor(std::ofstream& out, const char* name, const Vector& v) {
  out << "tensor\t" << name << '\t' << v.size() << "\t1";
  for (Eigen::Index i = 0; i < v.size(); ++i)
    out << '\t' << format_double(v(i));
  out << '\n';
}

void read_tensor(const std::vector<std::string>& f, int line_no, Matrix& m) {
  const long rows = parse_long(f[2], line_no);
  const long cols = parse_long(f[3], line_no);
  require_fields(f, static_cast<size_t>(4 + rows * cols), line_no, "tensor");
  m.resize(rows, cols);
  size_t off = 4;
  for (long r = 0; r < rows; ++r)
    for (long c = 0; c < cols; ++c) m(r, c) = parse_double(f[off++], line_no);
}

void read_tensor(const std::vector<std::string>& f, int line_no, Vector& v) {
  Matrix m;
  read_tensor(f, line_no, m);
  if (m.cols() != 1)
    throw IoError("line " + std::to_string(line_no) +
                  ": expected a column vector");
  v = m.col(0);
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  std::ofstream out = open_out(path);
  out << "tgbckpt\t" << kCheckpointSchemaVersion << '\t' << ckpt.fingerprint
      << '\t' << ckpt.epoch << '\n';
  out << "tau\t" << format_double(ckpt.params.tau) << '\n';
  write_tensor(out, "w1", ckpt.params.w1);
  write_tensor(out, "b1", ckpt.params.b1);
  write_tensor(out, "w2", ckpt.params.w2);
  write_tensor(out, "b2", ckpt.params.b2);
  write_tensor(out, "token_embed", ckpt.params.token_embed);
  write_tensor(out, "wt", ckpt.params.wt);
  write_tensor(out, "bt", ckpt.params.bt);
  if (ckpt.has_adam) {
    out << "adam\t" << ckpt.adam.step << '\n';
    write_tensor(out, "adam.m.w1", ckpt.adam.m.w1);
    write_tensor(out, "adam.m.b1", ckpt.adam.m.b1);
    write_tensor(out, "adam.m.w2", ckpt.adam.m.w2);
    write_tensor(out, "adam.m.b2", ckpt.adam.m.b2);
    write_tensor(out, "adam.m.token_embed", ckpt.adam.m.token_embed);
    write_tensor(out, "adam.m.wt", ckpt.adam.m.wt);
    write_tensor(out, "adam.m.bt", ckpt.adam.m.bt);
    write_tensor(out, "adam.v.w1", ckpt.adam.v.w1);
    write_tensor(out, "adam.v.b1", ckpt.adam.v.b1);
    write_tensor(out, "adam.v.w2", ckpt.adam.v.w2);
    write_tensor(out, "adam.v.b2", ckpt.adam.v.b2);
    write_tensor(out, "adam.v.token_embed", ckpt.adam.v.token_embed);
    write_tensor(out, "adam.v.wt", ckpt.adam.v.wt);
    write_tensor(out, "adam.v.bt", ckpt.adam.v.bt);
  }
  out << "rng\t" << ckpt.shuffle_counter << '\t' << ckpt.poison_counter << '\t'
      << ckpt.pgd_counter << '\n';
  out << "end\n";
  if (!out) throw IoError("write failure: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in = open_in(path);
  Checkpoint ckpt;
  std::string line;
  int line_no = 0;
  bool saw_end = false;

  std::map<std::string, Matrix*> mats{
      {"w1", &ckpt.params.w1},
      {"w2", &ckpt.params.w2},
      {"token_embed", &ckpt.params.token_embed},
      {"wt", &ckpt.params.wt},
      {"adam.m.w1", &ckpt.adam.m.w1},
      {"adam.m.w2", &ckpt.adam.m.w2},
      {"adam.m.token_embed", &ckpt.adam.m.token_embed},
      {"adam.m.wt", &ckpt.adam.m.wt},
      {"adam.v.w1", &ckpt.adam.v.w1},
      {"adam.v.w2", &ckpt.adam.v.w2},
      {"adam.v.token_embed", &ckpt.adam.v.token_embed},
      {"adam.v.wt", &ckpt.adam.v.wt},
  };
  std::map<std::string, Vector*> vecs{
      {"b1", &ckpt.params.b1},       {"b2", &ckpt.params.b2},
      {"bt", &ckpt.params.bt},       {"adam.m.b1", &ckpt.adam.m.b1},
      {"adam.m.b2", &ckpt.adam.m.b2}, {"adam.m.bt", &ckpt.adam.m.bt},
      {"adam.v.b1", &ckpt.adam.v.b1}, {"adam.v.b2", &ckpt.adam.v.b2},
      {"adam.v.bt", &ckpt.adam.v.bt},
  };

  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> f = split_tabs(line);
    if (line_no == 1) {
      require_fields(f, 4, line_no, "header");
      if (f[0] != "tgbckpt") throw IoError("line 1: not a tgb checkpoint file");
      if (parse_long(f[1], 1) != kCheckpointSchemaVersion)
        throw IoError("line 1: checkpoint schema version " + f[1] +
                      " unsupported (expected " +
                      std::to_string(kCheckpointSchemaVersion) + ")");
      ckpt.fingerprint = f[2];
      ckpt.epoch = static_cast<int>(parse_long(f[3], 1));
      continue;
    }
    if (f[0] == "tau") {
      require_fields(f, 2, line_no, "tau");
      ckpt.params.tau = parse_double(f[1], line_no);
    } else if (f[0] == "tensor") {
      if (f.size() < 4)
        throw IoError("line " + std::to_string(line_no) + ": truncated tensor");
      if (auto it = mats.find(f[1]); it != mats.end())
        read_tensor(f, line_no, *it->second);
      else if (auto jt = vecs.find(f[1]); jt != vecs.end())
        read_tensor(f, line_no, *jt->second);
      else
        throw IoError("line " + std::to_string(line_no) +
                      ": unknown tensor '" + f[1] + "'");
    } else if (f[0] == "adam") {
      require_fields(f, 2, line_no, "adam");
      ckpt.has_adam = true;
      ckpt.adam.step = parse_long(f[1], line_no);
    } else if (f[0] == "rng") {
      require_fields(f, 4, line_no, "rng");
      ckpt.shuffle_counter = parse_u64(f[1], line_no);
      ckpt.poison_counter = parse_u64(f[2], line_no);
      ckpt.pgd_counter = parse_u64(f[3], line_no);
    } else if (f[0] == "end") {
      saw_end = true;
    } else {
      throw IoError("line " + std::to_string(line_no) +
                    ": unknown record type '" + f[0] + "'");
    }
  }
  if (!saw_end)
    throw IoError(path + ": truncated checkpoint (last good line " +
                  std::to_string(line_no) + ")");
  return ckpt;
}

}  // namespace tgb
