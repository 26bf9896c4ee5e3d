#include <cstdio>

int main() {
    std::puts("mimdm: CLI under construction");
    return 0;
}
