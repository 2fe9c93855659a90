#include "laflow/trace.hpp"

#include <cstdio>
#include <fstream>

#include "laflow/errors.hpp"

namespace laflow {

void write_trace_csv(const TimeTrace& trace,
                     const std::filesystem::path& file) {
  std::ofstream out(file);
  if (!out) throw IoError("cannot write " + file.string());
  out << "t_index,t_ms,value\n";
  char buf[96];
  for (int i = 0; i < trace.nt(); ++i) {
    std::snprintf(buf, sizeof(buf), "%d,%.6f,%.9g\n", i, trace.t_ms(i),
                  trace.values[i]);
    out << buf;
  }
}

}  // namespace laflow
