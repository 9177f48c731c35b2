auto r = u8R"(/*)"; auto s = LR"(*/)"; auto t = uR"(//)"; auto v = UR"(x)";
