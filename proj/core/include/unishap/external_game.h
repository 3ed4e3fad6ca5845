#ifndef UNISHAP_EXTERNAL_GAME_H_
#define UNISHAP_EXTERNAL_GAME_H_

#include <mutex>
#include <string>

#include "unishap/games.h"

namespace unishap {

// A game evaluated by a subprocess over a line protocol on its standard
// streams:
//   -> HELLO d=<d>           <- HELLO d=<d>
//   -> EVAL <k>              <- VALUES <k>
//   -> k base64 masks        <- k decimal values
//   -> BYE
// Masks are little-endian bitmasks of ceil(d/8) bytes. The command runs
// under /bin/sh -c. Access is serialized; one request per chunk.
class ExternalGame : public Game {
 public:
  struct Options {
    int timeout_ms = 30000;  // per response line
    std::size_t batch_size = kDefaultBatchSize;
  };

  ExternalGame(const std::string& command, int d);
  ExternalGame(const std::string& command, int d, const Options& options);
  ~ExternalGame() override;

  bool concurrent() const override { return false; }
  std::string Describe() const override { return "external:" + command_; }

 protected:
  void DoEvaluate(const SubsetBatch& batch, std::size_t begin, std::size_t end,
                  double* out) const override;

 private:
  void Start();
  void Shutdown();
  void WriteAll(const std::string& data) const;
  std::string ReadLine() const;
  [[noreturn]] void RaiseExit(const std::string& context) const;

  std::string command_;
  Options options_;
  int pid_ = -1;
  int fd_ = -1;
  mutable std::mutex mu_;
  mutable std::string buffer_;
  mutable long lines_read_ = 0;
  mutable bool dead_ = false;
};

}  // namespace unishap

#endif  // UNISHAP_EXTERNAL_GAME_H_
