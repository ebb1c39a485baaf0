// Command-line front end. Subcommands are wired in as the pipeline stages
// land; see scenario_cli sources.
#include <cstdio>

int main() {
  std::puts("copush: pipeline stages not wired yet");
  return 0;
}
