#include <atomic>
#include <chrono>
#include <csignal>
#include <iostream>
#include <stop_token>
#include <thread>

#include "wxline/commands.hpp"

namespace {

volatile std::sig_atomic_t g_signalled = 0;

void on_signal(int) { g_signalled = 1; }

}  // namespace

int main(int argc, char** argv) {
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  std::signal(SIGPIPE, SIG_IGN);

  std::stop_source stop;
  // Signal handlers may only touch the flag; this thread turns it into a
  // stop request that every loop observes.
  std::jthread watcher([&stop](std::stop_token self) {
    while (!self.stop_requested()) {
      if (g_signalled != 0) {
        stop.request_stop();
        return;
      }
      std::this_thread::sleep_for(std::chrono::milliseconds(20));
    }
  });

  const int code = wxline::cli::run(argc, argv, stop.get_token(), std::cout, std::cerr);
  std::cout.flush();
  return code;
}
