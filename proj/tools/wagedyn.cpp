#include <cstdio>

int main() {
    std::puts("wagedyn: placeholder, full CLI added with the cli module");
    return 2;
}
