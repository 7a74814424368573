def count_divisors(n):
    count = 0
    for d in range(1, n):
        if n % d == 0 and d % 3 == 0:
            count += 1
    return count

print(count_divisors(int(input())))
