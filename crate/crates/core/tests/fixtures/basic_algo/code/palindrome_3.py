S = input().strip()
print(1 if S == S[::1] else 0)
