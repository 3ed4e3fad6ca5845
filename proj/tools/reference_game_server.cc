// Minimal external game server speaking the line protocol on stdin/stdout.
// v(S) = sum_{i in S} (i + 1) + 0.5 |S|^2.
//
// Fault injection for tests:
//   --fault malformed|exit|hang   misbehave on a request
//   --fault-after N               after N well-formed responses (default 0)
#include <chrono>
#include <cstdio>
#include <iostream>
#include <string>
#include <thread>

#include "unishap/base64.h"

int main(int argc, char** argv) {
  int d = -1;
  std::string fault;
  int fault_after = 0;
  for (int i = 1; i + 1 < argc; i += 2) {
    const std::string key = argv[i];
    if (key == "--d") {
      d = std::stoi(argv[i + 1]);
    } else if (key == "--fault") {
      fault = argv[i + 1];
    } else if (key == "--fault-after") {
      fault_after = std::stoi(argv[i + 1]);
    } else {
      std::cerr << "unknown flag " << key << "\n";
      return 2;
    }
  }
  if (d <= 0) {
    std::cerr << "usage: reference_game_server --d D [--fault KIND --fault-after N]\n";
    return 2;
  }
  std::ios::sync_with_stdio(false);
  std::string line;
  if (!std::getline(std::cin, line)) return 1;
  std::cout << "HELLO d=" << d << "\n" << std::flush;
  if (line != "HELLO d=" + std::to_string(d)) return 1;

  int served = 0;
  while (std::getline(std::cin, line)) {
    if (line == "BYE") return 0;
    if (line.rfind("EVAL ", 0) != 0) {
      std::cerr << "unexpected request '" << line << "'\n";
      return 1;
    }
    const long k = std::stol(line.substr(5));
    std::string out = "VALUES " + std::to_string(k) + "\n";
    const bool faulty = !fault.empty() && served >= fault_after;
    if (faulty && fault == "exit") return 3;
    if (faulty && fault == "hang") {
      std::this_thread::sleep_for(std::chrono::seconds(60));
      return 0;
    }
    for (long r = 0; r < k; ++r) {
      if (!std::getline(std::cin, line)) return 1;
      const auto bytes = unishap::Base64Decode(line);
      double value = 0.0;
      int size = 0;
      for (int j = 0; j < d; ++j) {
        if ((bytes[j / 8] >> (j % 8)) & 1) {
          value += j + 1;
          ++size;
        }
      }
      value += 0.5 * size * size;
      if (faulty && fault == "malformed" && r >= 1) {
        out += "not-a-number\n";
      } else {
        char buf[64];
        std::snprintf(buf, sizeof(buf), "%.17g\n", value);
        out += buf;
      }
    }
    std::cout << out << std::flush;
    ++served;
  }
  return 0;
}
