#include "unishap/subset.h"

#include <algorithm>
#include <bit>
#include <functional>
#include <stdexcept>

#include "unishap/base64.h"

namespace unishap {
namespace {

Word TailMask(int d) {
  const int r = d & 63;
  return r == 0 ? ~Word{0} : ((Word{1} << r) - 1);
}

void CheckIndex(int d, int j) {
  if (j < 0 || j >= d) {
    throw std::out_of_range("player index " + std::to_string(j) +
                            " outside [0, " + std::to_string(d) + ")");
  }
}

}  // namespace

int SubsetView::Size() const {
  int s = 0;
  for (Word w : words_) s += std::popcount(w);
  return s;
}

std::vector<int> SubsetView::Members() const {
  std::vector<int> out;
  CollectIndices(true, out);
  return out;
}

void SubsetView::CollectIndices(bool take_members, std::vector<int>& out) const {
  const int n = static_cast<int>(words_.size());
  for (int k = 0; k < n; ++k) {
    Word w = take_members ? words_[k] : ~words_[k];
    if (k == n - 1) w &= TailMask(d_);
    while (w) {
      out.push_back(k * 64 + std::countr_zero(w));
      w &= w - 1;
    }
  }
}

std::vector<std::uint8_t> SubsetView::ToBytes() const {
  std::vector<std::uint8_t> bytes((d_ + 7) / 8);
  for (std::size_t b = 0; b < bytes.size(); ++b) {
    bytes[b] = static_cast<std::uint8_t>(words_[b / 8] >> (8 * (b % 8)));
  }
  return bytes;
}

std::string SubsetView::ToBase64() const { return Base64Encode(ToBytes()); }

Subset::Subset(int d) : d_(d), words_(WordsFor(d), 0) {
  if (d < 1) throw std::invalid_argument("Subset: d must be positive");
}

Subset Subset::FromMembers(int d, const std::vector<int>& members) {
  Subset s(d);
  for (int j : members) s.Insert(j);
  return s;
}

Subset Subset::FromMask(int d, std::uint64_t mask) {
  if (d > 64) throw std::invalid_argument("Subset::FromMask requires d <= 64");
  if (d < 64 && (mask >> d) != 0) {
    throw std::invalid_argument("Subset::FromMask: bits beyond d");
  }
  Subset s(d);
  s.words_[0] = mask;
  s.size_ = std::popcount(mask);
  return s;
}

Subset Subset::FromBytes(int d, const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() != static_cast<std::size_t>((d + 7) / 8)) {
    throw std::invalid_argument("Subset::FromBytes: expected " +
                                std::to_string((d + 7) / 8) + " bytes");
  }
  Subset s(d);
  for (std::size_t b = 0; b < bytes.size(); ++b) {
    s.words_[b / 8] |= Word{bytes[b]} << (8 * (b % 8));
  }
  if (s.words_.back() & ~TailMask(d)) {
    throw std::invalid_argument("Subset::FromBytes: bits beyond d");
  }
  s.size_ = s.view().Size();
  return s;
}

Subset Subset::Full(int d) {
  Subset s(d);
  for (Word& w : s.words_) w = ~Word{0};
  s.words_.back() &= TailMask(d);
  s.size_ = d;
  return s;
}

void Subset::Insert(int j) {
  CheckIndex(d_, j);
  Word bit = Word{1} << (j & 63);
  if (!(words_[j >> 6] & bit)) {
    words_[j >> 6] |= bit;
    ++size_;
  }
}

void Subset::Erase(int j) {
  CheckIndex(d_, j);
  Word bit = Word{1} << (j & 63);
  if (words_[j >> 6] & bit) {
    words_[j >> 6] &= ~bit;
    --size_;
  }
}

Subset Subset::Complement() const {
  Subset s(d_);
  for (std::size_t k = 0; k < words_.size(); ++k) s.words_[k] = ~words_[k];
  s.words_.back() &= TailMask(d_);
  s.size_ = d_ - size_;
  return s;
}

void SubsetBatch::reserve(std::size_t n) {
  words_.reserve(n * stride_);
  sizes_.reserve(n);
}

void SubsetBatch::clear() {
  words_.clear();
  sizes_.clear();
}

Word* SubsetBatch::Grow() {
  words_.resize(words_.size() + stride_, 0);
  return words_.data() + words_.size() - stride_;
}

void SubsetBatch::Append(const Subset& s) {
  if (s.dimension() != d_) throw std::invalid_argument("SubsetBatch: d mismatch");
  Word* w = Grow();
  std::copy(s.words().begin(), s.words().end(), w);
  sizes_.push_back(s.size());
}

// Like Grow(), but keeps `s` valid when it points into this batch.
Word* SubsetBatch::GrowFrom(SubsetView& s) {
  const std::less<const Word*> before;
  const Word* p = s.words().data();
  const bool inside = !words_.empty() && !before(p, words_.data()) &&
                      before(p, words_.data() + words_.size());
  const std::size_t offset = inside ? static_cast<std::size_t>(p - words_.data()) : 0;
  Word* w = Grow();
  if (inside) {
    s = SubsetView(d_, std::span<const Word>(words_.data() + offset, stride_));
  }
  return w;
}

void SubsetBatch::Append(SubsetView s) {
  if (s.dimension() != d_) throw std::invalid_argument("SubsetBatch: d mismatch");
  Word* w = GrowFrom(s);
  std::copy(s.words().begin(), s.words().end(), w);
  sizes_.push_back(s.Size());
}

void SubsetBatch::AppendComplement(SubsetView s) {
  if (s.dimension() != d_) throw std::invalid_argument("SubsetBatch: d mismatch");
  Word* w = GrowFrom(s);
  for (int k = 0; k < stride_; ++k) w[k] = ~s.words()[k];
  w[stride_ - 1] &= TailMask(d_);
  sizes_.push_back(d_ - s.Size());
}

void SubsetBatch::AppendMask(std::uint64_t mask) {
  if (d_ > 64) throw std::invalid_argument("SubsetBatch::AppendMask: d > 64");
  Word* w = Grow();
  w[0] = mask;
  sizes_.push_back(std::popcount(mask));
}

void SubsetBatch::AppendMembers(std::span<const int> members) {
  Word* w = Grow();
  int size = 0;
  for (int j : members) {
    CheckIndex(d_, j);
    Word bit = Word{1} << (j & 63);
    if (!(w[j >> 6] & bit)) {
      w[j >> 6] |= bit;
      ++size;
    }
  }
  sizes_.push_back(size);
}

void SubsetBatch::AppendComplementOfMembers(std::span<const int> members) {
  AppendMembers(members);
  Word* w = words_.data() + words_.size() - stride_;
  for (int k = 0; k < stride_; ++k) w[k] = ~w[k];
  w[stride_ - 1] &= TailMask(d_);
  sizes_.back() = d_ - sizes_.back();
}

void SubsetBatch::AppendAll(const SubsetBatch& other) {
  if (other.d_ != d_) throw std::invalid_argument("SubsetBatch: d mismatch");
  words_.insert(words_.end(), other.words_.begin(), other.words_.end());
  sizes_.insert(sizes_.end(), other.sizes_.begin(), other.sizes_.end());
}

}  // namespace unishap
