#include <stdio.h>

unsigned int MD5(int a,int b) {
return ((a << 5)^(b << b))*(a-b);}

int main() {
    int a = 33;
    int b = a-9;
    const char* password = "Secret!";
    int result=MD5(a,b);
    printf("Result: %d\n", result);
    return 0;
}
