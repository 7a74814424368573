S = input().strip()
i, j = 0, len(S) - 1
while i < j:
    if S[i] != S[j]:
        print(0)
    i += 1
    j -= 1
print(1)
