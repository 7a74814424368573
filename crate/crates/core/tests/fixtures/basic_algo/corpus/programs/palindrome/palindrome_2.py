S = input().strip()
ok = 1
for i in range(len(S) // 2):
    if S[i] != S[len(S) - i]:
        ok = 0
print(ok)
