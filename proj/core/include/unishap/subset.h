#ifndef UNISHAP_SUBSET_H_
#define UNISHAP_SUBSET_H_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace unishap {

using Word = std::uint64_t;

inline int WordsFor(int d) { return (d + 63) / 64; }

// Read-only view of one packed coalition inside a batch or Subset.
class SubsetView {
 public:
  SubsetView(int d, std::span<const Word> words) : d_(d), words_(words) {}

  int dimension() const { return d_; }
  bool Contains(int j) const { return (words_[j >> 6] >> (j & 63)) & 1u; }
  int Size() const;
  std::span<const Word> words() const { return words_; }

  // Member indices in increasing order.
  std::vector<int> Members() const;
  // Indices of members (take_members) or non-members, appended to `out`.
  void CollectIndices(bool take_members, std::vector<int>& out) const;

  // Little-endian bitmask of ceil(d/8) bytes.
  std::vector<std::uint8_t> ToBytes() const;
  std::string ToBase64() const;
  // Only valid for d <= 64.
  std::uint64_t ToMask() const { return words_.empty() ? 0 : words_[0]; }

 private:
  int d_;
  std::span<const Word> words_;
};

// An owning coalition over d players with a cached size.
class Subset {
 public:
  explicit Subset(int d);
  static Subset FromMembers(int d, const std::vector<int>& members);
  static Subset FromMask(int d, std::uint64_t mask);
  static Subset FromBytes(int d, const std::vector<std::uint8_t>& bytes);
  static Subset Full(int d);

  int dimension() const { return d_; }
  int size() const { return size_; }
  bool Contains(int j) const { return view().Contains(j); }
  void Insert(int j);
  void Erase(int j);
  Subset Complement() const;

  SubsetView view() const { return SubsetView(d_, words_); }
  const std::vector<Word>& words() const { return words_; }

  bool operator==(const Subset& other) const {
    return d_ == other.d_ && words_ == other.words_;
  }

 private:
  int d_;
  int size_ = 0;
  std::vector<Word> words_;
};

// Contiguous storage for many coalitions over the same d.
class SubsetBatch {
 public:
  explicit SubsetBatch(int d) : d_(d), stride_(WordsFor(d)) {}

  int dimension() const { return d_; }
  std::size_t size() const { return sizes_.size(); }
  bool empty() const { return sizes_.empty(); }
  void reserve(std::size_t n);
  void clear();

  void Append(const Subset& s);
  void Append(SubsetView s);
  // Appends the complement of s.
  void AppendComplement(SubsetView s);
  void AppendMask(std::uint64_t mask);
  // Appends the set whose members are `members`.
  void AppendMembers(std::span<const int> members);
  // Appends the complement of the set with members `members`.
  void AppendComplementOfMembers(std::span<const int> members);
  void AppendAll(const SubsetBatch& other);

  SubsetView operator[](std::size_t i) const {
    return SubsetView(d_, std::span<const Word>(words_.data() + i * stride_,
                                                stride_));
  }
  int SizeOf(std::size_t i) const { return sizes_[i]; }
  const std::vector<int>& sizes() const { return sizes_; }

 private:
  Word* Grow();
  Word* GrowFrom(SubsetView& s);

  int d_;
  int stride_;
  std::vector<Word> words_;
  std::vector<int> sizes_;
};

}  // namespace unishap

#endif  // UNISHAP_SUBSET_H_
