char c = '\''; char d = '"'; // x
