#include <cstdio>

int main() {
  std::puts("symbox: placeholder");
  return 0;
}
