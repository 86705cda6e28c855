#include <assert.h>

unsigned int nondet_uint(void);

int main() {
    unsigned int h = nondet_uint();
    for (unsigned int i = 0; i < 100000; i++) {
        unsigned int k = nondet_uint();
        h = (h * 2654435761u) ^ (k * 40503u) ^ (h >> 13);
        h = h * h + k;
    }
    assert(h != 12345u);
    return 0;
}
