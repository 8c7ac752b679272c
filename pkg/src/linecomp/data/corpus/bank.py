import datetime

OVERDRAFT_LIMIT = -100


class InsufficientFunds(Exception):
    pass


class Account(object):
    next_id = 1

    def __init__(self, owner, balance=0):
        self.owner = owner
        self.balance = balance
        self.transactions = []
        self.id = Account.next_id
        Account.next_id += 1

    def deposit(self, amount):
        if amount <= 0:
            raise ValueError("deposit must be positive")
        self.balance += amount
        self.log("deposit", amount)
        return self.balance

    def withdraw(self, amount):
        if self.balance - amount < OVERDRAFT_LIMIT:
            raise InsufficientFunds("cannot withdraw %d" % amount)
        self.balance -= amount
        self.log("withdraw", -amount)
        return self.balance

    def log(self, kind, amount):
        stamp = datetime.datetime.now()
        self.transactions.append((stamp, kind, amount))

    def statement(self):
        lines = ["Statement for " + self.owner]
        for stamp, kind, amount in self.transactions:
            lines.append("%s %-10s %8.2f" % (stamp.date(), kind, amount))
        lines.append("Balance: %.2f" % self.balance)
        return lines


class Bank(object):
    def __init__(self, name):
        self.name = name
        self.accounts = {}

    def open(self, owner, initial=0):
        account = Account(owner, initial)
        self.accounts[account.id] = account
        return account

    def transfer(self, source, target, amount):
        a = self.accounts[source]
        b = self.accounts[target]
        a.withdraw(amount)
        try:
            b.deposit(amount)
        except ValueError:
            a.deposit(amount)
            raise
        return a.balance, b.balance

    def total_deposits(self):
        return sum([acc.balance for acc in self.accounts.values() if acc.balance > 0])

    def richest(self, n=3):
        ordered = sorted(self.accounts.values(), key=balance_of, reverse=True)
        return ordered[:n]

    def close(self, account_id):
        account = self.accounts.pop(account_id)
        if account.balance < 0:
            self.accounts[account_id] = account
            raise InsufficientFunds("settle the overdraft first")
        del account.transactions[:]
        return account.balance


def balance_of(account):
    return account.balance
